#include <iostream>
#include <string>
#include <vector>

#include "reflect/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return reflect::cli::run(args, std::cout, std::cerr);
}
