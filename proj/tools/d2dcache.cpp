#include "d2d/runner.hpp"

#include <iostream>

int main(int argc, char** argv) {
    return d2d::cli_main(argc, argv, std::cout, std::cerr);
}
