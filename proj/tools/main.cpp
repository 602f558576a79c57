#include <iostream>
#include <string>
#include <vector>

#include "difflab/cli.hpp"

int main(int argc, char** argv) {
    const std::vector<std::string> args(argv + 1, argv + argc);
    return difflab::cli::run(args, std::cout, std::cerr);
}
