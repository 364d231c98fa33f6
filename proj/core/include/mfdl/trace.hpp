#pragma once

#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

namespace mfdl {

// Iteration log shared by every optimizer and trainer.
// CSV schema: iter,f,grad_norm,step,ls_count,wall_ms
// ls_count is the number of objective evaluations spent in the line search
// of that iteration (1 = first trial accepted); 0 for methods without one.
struct TraceRow {
    int iter = 0;
    double f = 0.0;
    double grad_norm = 0.0;
    double step = 0.0;
    int ls_count = 0;
    double wall_ms = 0.0;
};

inline std::string format_g17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

struct Trace {
    std::vector<TraceRow> rows;

    void add(int iter, double f, double grad_norm, double step, int ls_count, double wall_ms) {
        rows.push_back({iter, f, grad_norm, step, ls_count, wall_ms});
    }

    // deterministic=true zeroes wall_ms so output files diff clean across runs
    void write_csv(std::ostream& os, bool deterministic = false) const {
        os << "iter,f,grad_norm,step,ls_count,wall_ms\n";
        for (const auto& r : rows) {
            os << r.iter << ',' << format_g17(r.f) << ',' << format_g17(r.grad_norm) << ','
               << format_g17(r.step) << ',' << r.ls_count << ','
               << format_g17(deterministic ? 0.0 : r.wall_ms) << '\n';
        }
    }
};

} // namespace mfdl
