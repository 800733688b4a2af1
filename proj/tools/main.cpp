#include <iostream>

#include "dswarm/cli.hpp"

int main(int argc, char** argv) {
    return dswarm::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
