#include "ntklab/experiment.hpp"

int main(int argc, char** argv) { return ntklab::run_cli(argc, argv); }
