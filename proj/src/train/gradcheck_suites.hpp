#pragma once

#include "nn/gradcheck.hpp"

#include <string>
#include <vector>

namespace cfe::train {

struct ScopeItem {
    std::string name;
    double max_rel_err = 0.0;
    double tolerance = 0.0;
    int entries_checked = 0;
    bool passed() const { return max_rel_err < tolerance; }
};

struct ScopeReport {
    std::string scope;
    std::vector<ScopeItem> items;
    double max_rel_err = 0.0;
    bool passed() const;
    std::size_t parameters_checked() const { return items.size(); }
};

// scope: "op" (every layer primitive under its own tolerance), "cenet",
// "prnet" or "full" (the composed pipeline on a 16x16 desk configuration).
ScopeReport run_gradcheck_scope(const std::string& scope);

std::string render_gradcheck_report(const ScopeReport& report);

} // namespace cfe::train
