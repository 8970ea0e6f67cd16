#include <iostream>

#include "fpcav_cli.hpp"

int main(int argc, char **argv)
{
    return fpcav::cli::run(argc, argv, std::cout, std::cerr);
}
