#pragma once

// Data-parallel kernels behind analytics and the fallback embedder. Each
// kernel has a serial reference twin; tests hold the OpenMP versions to the
// serial ones and bench/ compares their throughput.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace vigc::kernels {

/// Dense row-major matrix of embeddings.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
};

Matrix from_rows(const std::vector<std::vector<double>>& rows);

Matrix hashing_embed_serial(std::span<const std::string> texts, std::size_t dim);
Matrix hashing_embed_omp(std::span<const std::string> texts, std::size_t dim);

// Sum over i < j of (1 - <x_i, x_j>). Rows are assumed unit-norm, so each
// term is a cosine distance. The OpenMP version reduces per-row partial sums
// in row order, which keeps its result independent of the thread count.
double pairwise_distance_sum_serial(const Matrix& m);
double pairwise_distance_sum_omp(const Matrix& m);

}  // namespace vigc::kernels
