#include "commands.hpp"

int main(int argc, char** argv) { return epiforge::cli::run(argc, argv); }
