#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "nico/tsp.hpp"

namespace nico {

enum class InstanceFormat { kTsplibEuc2d, kJsonl };

// Parses exactly one instance. For JSONL the text must hold a single object.
Instance parse_instance(std::string_view text, InstanceFormat format);

// Parses every instance in the text (one per line for JSONL).
std::vector<Instance> parse_instances(std::string_view text, InstanceFormat format);

std::string to_jsonl_line(const Instance& instance);
std::string to_tsplib(const Instance& instance);

// Guesses the format from the extension (.tsp -> TSPLIB, anything else JSONL).
std::vector<Instance> load_dataset(const std::filesystem::path& path);
void write_dataset(const std::filesystem::path& path, const std::vector<Instance>& instances);

struct TourRecord {
  std::string id;
  Tour order;
  double cost = 0.0;
};

std::string to_json(const TourRecord& record);
TourRecord parse_tour_record(std::string_view text);

// Tour files hold one JSON tour object per line; several lines may share an id.
std::vector<TourRecord> load_tours(const std::filesystem::path& path);
void write_tours(const std::filesystem::path& path, const std::vector<TourRecord>& tours);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace nico
