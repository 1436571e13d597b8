#include <string>
#include <vector>

#include "cisid/cli.hpp"

int main(int argc, char** argv)
{
    return cisid::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
