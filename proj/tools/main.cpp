#include <iostream>

#include "vasso/cli.hpp"

int main(int argc, char** argv) {
    return vasso::cli_main(argc, argv, std::cout, std::cerr);
}
