#include <iostream>

#include "divspline/cli/run.hpp"

int main(int argc, char** argv) {
    divspline::cli::CaseConfig config;
    try {
        config = divspline::cli::parse_args(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "divspline: configuration error: " << e.what() << "\n";
        return 1;
    }
    return divspline::cli::run(config);
}
