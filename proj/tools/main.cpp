#include "cli.hpp"

int main(int argc, char** argv) { return troop::cli::run(argc, argv); }
