// Full-size acceptance run: one PASS/FAIL line per criterion.
#include <cstdio>
#include <cstdlib>
#include <string>

#include "calmreg/verify.hpp"

int main(int argc, char** argv) {
    calmreg::VerifyOptions opt;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--quick") opt.quick = true;
        else if (a == "--seed" && i + 1 < argc) opt.seed = std::strtoull(argv[++i], nullptr, 10);
    }
    const calmreg::VerifyResult r = calmreg::run_verify(opt, [](const calmreg::CriterionResult& c) {
        std::printf("%s %2d %s value=%.6g threshold=%.6g (%.1fs) %s\n", c.pass ? "PASS" : "FAIL", c.id,
                    c.name.c_str(), c.value, c.threshold, c.seconds, c.detail.c_str());
        std::fflush(stdout);
    });
    std::printf("%s: %zu criteria, %.1fs\n", r.all_pass() ? "ALL PASS" : "FAILURES", r.items.size(), r.seconds);
    return r.all_pass() ? 0 : 1;
}
