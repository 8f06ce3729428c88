#include "mlpr/harness/commands.hpp"

int main(int argc, char** argv) { return mlpr::harness::run_cli(argc, argv); }
