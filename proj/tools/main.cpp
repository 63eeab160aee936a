#include "cavity/cli.hpp"

int main(int argc, char** argv) {
    return cavity::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
