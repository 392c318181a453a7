#include <csignal>
#include <iostream>

#include "vigc/commands.hpp"

namespace {

extern "C" void on_interrupt(int) {
  vigc::cli_cancel_flag().store(true);
  std::signal(SIGINT, SIG_DFL);
}

}  // namespace

int main(int argc, char** argv) {
  std::signal(SIGINT, on_interrupt);
  return vigc::run_cli(argc, argv, std::cout, std::cerr);
}
