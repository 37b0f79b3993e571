#include "funrl/cli.hpp"

int main(int argc, char** argv) { return funrl::cli::run(argc, argv); }
