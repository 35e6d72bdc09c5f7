#include "clpose/cli.hpp"

int main(int argc, char** argv) { return clpose::run_cli(argc, argv); }
