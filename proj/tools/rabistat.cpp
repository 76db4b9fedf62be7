// rabistat: sweeps and traces of thermal photon statistics.
//
//   rabistat g2zero --g-steps 60 --t-steps 60 --out runs/fig1
//   rabistat spectrum --markers --normalize paper-figure --out runs/spectra

#include <iostream>
#include <string>
#include <vector>

#include "rabistat/error.hpp"
#include "rabistat/sweep.hpp"

int main(int argc, char** argv) {
    const std::vector<std::string> args(argv + 1, argv + argc);
    try {
        const auto config = rabistat::parse_config(args.empty() ? std::vector<std::string>{"--help"} : args, std::cout);
        if (!config) return 0;
        return rabistat::run(*config, std::cerr);
    } catch (const rabistat::Error& e) {
        std::cerr << "rabistat: " << to_string(e.code()) << ": " << e.what() << '\n';
        return e.code() == rabistat::ErrorCode::Config ? 2 : 3;
    } catch (const std::exception& e) {
        std::cerr << "rabistat: " << e.what() << '\n';
        return 3;
    }
}
