#include <sparselq/cli.hpp>

int main(int argc, char ** argv) { return sparselq::cli::run_command(argc, argv); }
