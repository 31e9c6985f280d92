#include "confusio/cli.hpp"

int main(int argc, char** argv) { return confusio::run_cli(argc, argv); }
