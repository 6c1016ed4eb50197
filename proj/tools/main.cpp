#include "commands.hpp"

int main(int argc, char** argv) { return mlv::cli::run_cli(argc, argv); }
