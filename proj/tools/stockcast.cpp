#include "stockcast/cli.hpp"

int main(int argc, char** argv) { return stockcast::cli_dispatch(argc, argv); }
