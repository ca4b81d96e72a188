#include <iostream>

#include "cli.hpp"

int main(int argc, char** argv)
{
    return regtune::cli::cmd_dispatch(argc, argv, std::cout, std::cerr);
}
