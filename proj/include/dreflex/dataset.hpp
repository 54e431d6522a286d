#pragma once

// Dataset persistence: one gzip-compressed file of line-delimited JSON.
// Line 1 is a header object (schema version, model hash, grid, master seed,
// record count); each following line is one DatasetRecord.

#include "dreflex/scenario.hpp"

#include <string>

namespace dreflex {

inline constexpr const char* kDatasetSchema = "d-reflex-dataset/1";

void save_dataset(const Dataset& dataset, const std::string& path);
Dataset load_dataset(const std::string& path);

// Single-record JSON codecs (exact round-trip), exposed for tests and tools.
std::string record_to_json(const DatasetRecord& rec);
DatasetRecord record_from_json(const std::string& line);

}  // namespace dreflex
