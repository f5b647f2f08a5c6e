#include "p4g/cli.hpp"

int main(int argc, char** argv) { return p4g::cli::dispatch(argc, argv); }
