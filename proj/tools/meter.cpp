#include "meter/cli.hpp"

int main(int argc, char** argv) { return meter::cli::run(argc, argv); }
