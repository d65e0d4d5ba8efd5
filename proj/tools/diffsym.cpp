#include <iostream>
#include <string>
#include <vector>

#include <diffsym/diffsym.hpp>

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return diffsym::run_cli(args, std::cout, std::cerr);
}
