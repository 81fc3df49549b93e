#include "commands.hpp"

int main(int argc, char** argv) {
    return rate::cli::run(argc, argv);
}
