#include <iostream>

#include "mkg/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return mkg::cli::run(args, std::cout, std::cerr);
}
