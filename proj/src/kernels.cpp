#include "vigc/kernels.hpp"

#include <cmath>

#include "vigc/error.hpp"
#include "vigc/rng.hpp"
#include "vigc/text.hpp"

namespace vigc::kernels {

namespace {

void embed_one(const std::string& text, std::span<double> out) {
  for (const auto& token : normalized_tokens(text)) {
    out[fnv1a64(token) % out.size()] += 1.0;
  }
  double norm = 0.0;
  for (double x : out) norm += x * x;
  if (norm == 0.0) {
    out[0] = 1.0;
    return;
  }
  norm = std::sqrt(norm);
  for (double& x : out) x /= norm;
}

double row_distance_sum(const Matrix& m, std::size_t i) {
  auto a = m.row(i);
  double acc = 0.0;
  for (std::size_t j = i + 1; j < m.rows; ++j) {
    auto b = m.row(j);
    double dot = 0.0;
    for (std::size_t k = 0; k < m.cols; ++k) dot += a[k] * b[k];
    acc += 1.0 - dot;
  }
  return acc;
}

}  // namespace

Matrix from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return {};
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != m.cols) throw Error(ErrorCode::EmbedderFailure, "embedding dimensions differ");
    std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
  }
  return m;
}

Matrix hashing_embed_serial(std::span<const std::string> texts, std::size_t dim) {
  Matrix m(texts.size(), dim);
  for (std::size_t i = 0; i < texts.size(); ++i) embed_one(texts[i], m.row(i));
  return m;
}

Matrix hashing_embed_omp(std::span<const std::string> texts, std::size_t dim) {
  Matrix m(texts.size(), dim);
  const auto n = static_cast<std::ptrdiff_t>(texts.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    embed_one(texts[static_cast<std::size_t>(i)], m.row(static_cast<std::size_t>(i)));
  }
  return m;
}

double pairwise_distance_sum_serial(const Matrix& m) {
  double total = 0.0;
  for (std::size_t i = 0; i < m.rows; ++i) {
    for (std::size_t j = i + 1; j < m.rows; ++j) {
      double dot = 0.0;
      for (std::size_t k = 0; k < m.cols; ++k) dot += m.data[i * m.cols + k] * m.data[j * m.cols + k];
      total += 1.0 - dot;
    }
  }
  return total;
}

double pairwise_distance_sum_omp(const Matrix& m) {
  std::vector<double> partial(m.rows, 0.0);
  const auto n = static_cast<std::ptrdiff_t>(m.rows);
  // Row i has n-1-i pairs; dynamic scheduling evens out the triangle.
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    partial[static_cast<std::size_t>(i)] = row_distance_sum(m, static_cast<std::size_t>(i));
  }
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

}  // namespace vigc::kernels
