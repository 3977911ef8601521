#include "pgpois/cli.hpp"

int main(int argc, char** argv) { return pgpois::run_cli(argc, argv); }
