#include "aide/cli.hpp"

int main(int argc, char** argv) { return aide::cli::dispatch(argc, argv); }
