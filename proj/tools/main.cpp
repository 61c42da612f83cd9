#include <vector>
#include <string>

#include "uecert/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return uecert::run(args);
}
