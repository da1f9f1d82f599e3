#include "tubescore/cli.hpp"

int main(int argc, char** argv) { return tubescore::run_cli(argc, argv); }
