#pragma once

#include "sleepctl/experiments/experiment.hpp"

#include <algorithm>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

namespace sleepctl {

/// Prints an aligned table of `rows` under `columns`.
inline void print_table(std::ostream& os, const std::vector<std::string>& columns,
                        const std::vector<std::vector<std::string>>& rows) {
    std::vector<std::size_t> width(columns.size());
    for (std::size_t i = 0; i < columns.size(); ++i)
        width[i] = columns[i].size();
    for (const auto& r : rows)
        for (std::size_t i = 0; i < r.size() && i < width.size(); ++i)
            width[i] = std::max(width[i], r[i].size());
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < width.size(); ++i) {
            const std::string c = i < cells.size() ? cells[i] : "";
            os << (i ? "  " : "") << std::setw(static_cast<int>(width[i])) << c;
        }
        os << '\n';
    };
    line(columns);
    std::size_t total = 0;
    for (auto w : width)
        total += w + 2;
    os << std::string(total > 2 ? total - 2 : 0, '-') << '\n';
    for (const auto& r : rows)
        line(r);
}

/// Summary of one experiment. Returns 0 when every consistency check
/// passed, 4 otherwise.
inline int report_summary(const ExperimentResult& res, std::ostream& os) {
    os << "experiment: " << res.name << "\n\n";
    print_table(os, res.columns, res.rows);
    os << '\n';
    for (const auto& c : res.checks)
        os << (c.pass ? "[ok]   " : "[FAIL] ") << c.name << (c.detail.empty() ? "" : ": " + c.detail) << '\n';
    for (const auto& f : res.files)
        os << "wrote " << f << '\n';
    os << "runtime " << std::fixed << std::setprecision(2) << res.runtime_s << " s\n";
    return res.ok() ? 0 : 4;
}

} // namespace sleepctl
