#include <cstdio>
#include <string>
#include <vector>

#include "greg/checks.hpp"

// Runs the acceptance criteria (all of them, or the names given as
// arguments) and prints one line each.
int main(int argc, char **argv)
{
    std::vector<std::string> names(argv + 1, argv + argc);
    if (names.empty()) names.push_back("all");
    int failed = 0;
    try {
        greg::run_checks(names, 0, [&](const greg::CheckResult &r) {
            std::printf("%s\n", greg::format_check(r).c_str());
            std::fflush(stdout);
            if (!r.passed) ++failed;
        });
    } catch (const std::exception &e) {
        std::fprintf(stderr, "acceptance: %s\n", e.what());
        return 1;
    }
    std::printf("%d of the checks failed\n", failed);
    return failed == 0 ? 0 : 1;
}
