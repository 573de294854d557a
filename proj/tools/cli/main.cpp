#include "runner.hpp"

int main(int argc, char** argv) { return pdhg::cli::cli_main(argc, argv); }
