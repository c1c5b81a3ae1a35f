// Regenerates the bundled synthetic price fixtures.
//
//   gen_fixture <out.csv> [student_t|gaussian] [rows] [seed]

#include <cstdlib>
#include <iostream>

#include "condcov/fixture.hpp"

int main(int argc, char** argv) {
    using namespace condcov;
    if (argc < 2) {
        std::cerr << "usage: gen_fixture <out.csv> [student_t|gaussian] [rows] [seed]\n";
        return 2;
    }
    const std::string out = argv[1];
    const std::string family = argc > 2 ? argv[2] : "student_t";
    const std::size_t rows = argc > 3 ? std::strtoull(argv[3], nullptr, 10) : 2528;
    const std::uint64_t seed = argc > 4 ? std::strtoull(argv[4], nullptr, 10) : 20152015;
    try {
        const Panel p = synthetic_prices_panel(family_from_name(family), rows, seed);
        write_panel_csv(p, out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
