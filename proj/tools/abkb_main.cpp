#include <iostream>

#include "abkb/cli.hpp"

int main(int argc, char** argv) {
    return abkb::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
