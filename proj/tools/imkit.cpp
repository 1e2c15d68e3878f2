#include "cli/app.hpp"

int main(int argc, char** argv) { return imkit::cli::run_cli(argc, argv, std::cout, std::cerr); }
