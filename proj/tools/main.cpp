#include "sqlp/cli.hpp"

int main(int argc, char** argv) { return sqlp::cli::run(argc, argv); }
