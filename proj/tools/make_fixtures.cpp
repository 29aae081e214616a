#include "fixtures.hpp"

#include "vhdlx/error.hpp"

#include <iostream>

int main(int argc, char** argv) {
    if (argc != 2) {
        std::cerr << "usage: make_fixtures <output dir>\n";
        return 2;
    }
    try {
        vhdlx::fixtures::write_all(argv[1]);
    } catch (const vhdlx::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
