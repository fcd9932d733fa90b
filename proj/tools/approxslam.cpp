#include "approxslam/commands.hpp"

int main(int argc, char** argv) { return approxslam::run_cli(argc, argv); }
