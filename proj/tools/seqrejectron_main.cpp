#include <string>
#include <vector>

#include "seqrej/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return seqrej::cli::run(args);
}
