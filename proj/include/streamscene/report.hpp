#pragma once

#include <filesystem>
#include <span>
#include <string>

#include "streamscene/harness.hpp"

namespace streamscene {

enum class ReportFormat { kJson, kCsv };

ReportFormat report_format_from_path(const std::filesystem::path& path);  // .csv -> CSV, else JSON

// JSON report (schemas/report.schema.json):
//   {"format": "streamscene-report/1", "scenes": [{"scene_id", "mode",
//    "truncated", "timesteps": [step...], "final": step | null}]}
// where "final" repeats the last timestep. Output is deterministic: same
// results, same bytes.
std::string report_json(std::span<const SceneResult> results);

// One row per timestep plus one "final" row per scene. Column set is fixed by
// `categories`; empty results give the header line only.
std::string report_csv(std::span<const SceneResult> results,
                       const CategoryVocabulary& categories = CategoryVocabulary::standard());

void write_report(const std::filesystem::path& path, std::span<const SceneResult> results,
                  ReportFormat format,
                  const CategoryVocabulary& categories = CategoryVocabulary::standard());

std::string eval_report_json(const EvalReport& report);

}  // namespace streamscene
