// Perturbs a few oracle reactor samples the way an imperfect surrogate would,
// then corrects them with the linear-only and the frozen-variable projection
// and prints the conservation error of each balance before and after.

#include <cstdio>

#include "hardproj/hardproj.hpp"

using namespace hardproj;

int main() {
    const auto th = reactor::default_thermo();
    const auto data = reactor::generate_dataset(th, 5, 1, reactor::default_bounds(), 2024);
    const auto bundle = resolve_constraints(reactor::constraint_id);

    Mat noisy = data.train.y;
    Rng rng(1);
    for (std::size_t r = 0; r < noisy.rows(); ++r) {
        noisy(r, reactor::out_T) += rng.uniform(-20.0, 20.0);
        for (std::size_t i = 0; i < reactor::n_species; ++i) noisy(r, reactor::out_flow0 + i) *= 1.0 + rng.uniform(-0.1, 0.1);
    }

    const Mat kkt = apply_global(build_global(*bundle.linear), data.train.x, noisy);
    const Mat picard = picard_project(*bundle.separable, data.train.x, noisy).y_tilde;

    const auto labels = reactor::balance_labels();
    std::printf("%-8s %-9s", "sample", "model");
    for (const auto& l : labels) std::printf(" %12s", ("RCE " + l).c_str());
    std::printf("\n");
    for (std::size_t r = 0; r < noisy.rows(); ++r) {
        const std::pair<const char*, const Mat*> rows[] = {{"noisy", &noisy}, {"kkt", &kkt}, {"picard", &picard}};
        for (const auto& [name, m] : rows) {
            const Vec e = metrics::rce(*bundle.separable, data.train.x.row(r), m->row(r));
            std::printf("%-8zu %-9s", r, name);
            for (double v : e) std::printf(" %11.3e%%", v);
            std::printf("\n");
        }
    }
    std::printf("T_out is frozen: noisy %.3f K, picard %.3f K\n", noisy(0, reactor::out_T), picard(0, reactor::out_T));
    return 0;
}
