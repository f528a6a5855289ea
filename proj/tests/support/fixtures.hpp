#pragma once

#include <memory>
#include <string>

#include "choicesql/catalog.hpp"

namespace choicesql::testing {

inline constexpr const char* kClockDate = "2022-10-01";

inline constexpr const char* kMeasureTemplate =
    "select state, sum(ANY{cases, deaths}) from covid group by state";

inline constexpr const char* kCasesByState = "select state, sum(cases) from covid group by state";
inline constexpr const char* kDeathsByState = "select state, sum(deaths) from covid group by state";

inline constexpr const char* kTrendTemplate =
    "select date, sum(cases) from covid\n"
    "where OPT{state = ANY{&state}} and\n"
    "OPT{date > date(today(), ANY{'-7 days', '-30 days'})}\n"
    "group by date";

inline constexpr const char* kMeasureQuestion =
    "What are the total covid cases or deaths across all the states in the US?";
inline constexpr const char* kTrendQuestion =
    "What are the covid case trends in the US and in different states? And what are the trends "
    "in the last 7 or 30 days?";

std::string data_path(const std::string& relative);
std::string read_file(const std::string& path);

/// Catalog with the covid fixture ingested and the clock pinned.
std::unique_ptr<DatasetCatalog> covid_catalog();

}  // namespace choicesql::testing
