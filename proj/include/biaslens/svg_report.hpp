#pragma once

#include <filesystem>
#include <string>

#include "biaslens/audit.hpp"

namespace biaslens::report {

// Standalone SVG 1.1 grouped-bar chart of an audit report: one bar per
// condition (mean accuracy), tick marks for the per-seed accuracies, a
// dashed horizontal chance baseline, axis labels. No external resources;
// byte-deterministic for identical reports.
std::string render_chart_svg(const audit::AuditReport& report);

void render_chart(const audit::AuditReport& report,
                  const std::filesystem::path& out_path);

}  // namespace biaslens::report
