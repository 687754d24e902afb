#include "nico/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "nico/error.hpp"

namespace nico {

namespace {

using nlohmann::json;

std::string trim(std::string_view s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string_view::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return std::string(s.substr(begin, end - begin + 1));
}

std::string upper(std::string s) {
  for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

std::string line_error(std::size_t line_no, std::string_view line, std::string_view what) {
  return "line " + std::to_string(line_no) + ": " + std::string(what) + ": '" +
         std::string(line) + "'";
}

Instance parse_tsplib(std::string_view text) {
  std::string name;
  long dimension = -1;
  bool in_coords = false;
  std::vector<Point> coords;
  std::vector<char> filled;

  std::istringstream stream{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(stream, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty()) continue;
    if (upper(line) == "EOF") break;

    if (in_coords) {
      std::istringstream fields(line);
      long node = 0;
      double x = 0.0;
      double y = 0.0;
      std::string extra;
      if (!(fields >> node >> x >> y) || (fields >> extra)) {
        throw ParseError(line_error(line_no, line, "malformed coordinate line"));
      }
      if (node < 1 || node > dimension) {
        throw ParseError(line_error(line_no, line, "node id out of range"));
      }
      if (filled[node - 1]) throw ParseError(line_error(line_no, line, "duplicate node id"));
      coords[node - 1] = {x, y};
      filled[node - 1] = 1;
      continue;
    }

    if (upper(line).rfind("NODE_COORD_SECTION", 0) == 0) {
      if (dimension < 0) {
        throw ParseError(line_error(line_no, line, "NODE_COORD_SECTION before DIMENSION"));
      }
      coords.assign(dimension, Point{});
      filled.assign(dimension, 0);
      in_coords = true;
      continue;
    }

    const auto colon = line.find(':');
    if (colon == std::string::npos) {
      throw ParseError(line_error(line_no, line, "expected 'KEY : VALUE'"));
    }
    const std::string key = upper(trim(std::string_view(line).substr(0, colon)));
    const std::string value = trim(std::string_view(line).substr(colon + 1));
    if (key == "NAME") {
      name = value;
    } else if (key == "DIMENSION") {
      long parsed = 0;
      auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), parsed);
      if (ec != std::errc{} || ptr != value.data() + value.size() || parsed < 1) {
        throw ParseError(line_error(line_no, line, "invalid DIMENSION"));
      }
      dimension = parsed;
    } else if (key == "EDGE_WEIGHT_TYPE") {
      if (upper(value) != "EUC_2D") {
        throw ParseError(line_error(line_no, line, "unsupported EDGE_WEIGHT_TYPE " + value));
      }
    } else if (key == "TYPE") {
      if (upper(value) != "TSP") {
        throw ParseError(line_error(line_no, line, "unsupported TYPE " + value));
      }
    }
    // COMMENT and other header keys are ignored.
  }

  if (dimension < 0) throw ParseError("missing DIMENSION");
  if (!in_coords) throw ParseError("missing NODE_COORD_SECTION");
  for (long k = 0; k < dimension; ++k) {
    if (!filled[k]) throw ParseError("missing coordinates for node " + std::to_string(k + 1));
  }
  return Instance(std::move(coords), name);
}

Instance instance_from_json(const json& object, std::size_t line_no) {
  const auto fail = [&](const std::string& what) {
    return ParseError("line " + std::to_string(line_no) + ": " + what);
  };
  if (!object.is_object()) throw fail("expected a JSON object");
  if (!object.contains("coords") || !object["coords"].is_array()) {
    throw fail("missing 'coords' array");
  }
  std::vector<Point> coords;
  for (const auto& pair : object["coords"]) {
    if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number() || !pair[1].is_number()) {
      throw fail("malformed coordinate pair " + pair.dump());
    }
    coords.push_back({pair[0].get<double>(), pair[1].get<double>()});
  }
  if (object.contains("n")) {
    if (!object["n"].is_number_integer() || object["n"].get<long>() != static_cast<long>(coords.size())) {
      throw fail("'n' does not match the number of coordinates");
    }
  }
  std::string id = object.contains("id") ? object["id"].get<std::string>() : std::string{};
  std::optional<double> opt;
  if (object.contains("opt_cost") && !object["opt_cost"].is_null()) {
    opt = object["opt_cost"].get<double>();
  }
  return Instance(std::move(coords), std::move(id), opt);
}

std::vector<Instance> parse_jsonl(std::string_view text) {
  std::vector<Instance> out;
  std::istringstream stream{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(stream, raw)) {
    ++line_no;
    if (trim(raw).empty()) continue;
    json object;
    try {
      object = json::parse(raw);
    } catch (const json::parse_error& e) {
      throw ParseError(line_error(line_no, raw, std::string("invalid JSON (") + e.what() + ")"));
    }
    try {
      out.push_back(instance_from_json(object, line_no));
    } catch (const json::exception& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

Instance parse_instance(std::string_view text, InstanceFormat format) {
  if (format == InstanceFormat::kTsplibEuc2d) return parse_tsplib(text);
  auto all = parse_jsonl(text);
  if (all.size() != 1) {
    throw ParseError("expected exactly one JSONL instance, found " + std::to_string(all.size()));
  }
  return std::move(all.front());
}

std::vector<Instance> parse_instances(std::string_view text, InstanceFormat format) {
  if (format == InstanceFormat::kTsplibEuc2d) return {parse_tsplib(text)};
  return parse_jsonl(text);
}

std::string to_jsonl_line(const Instance& instance) {
  json object = json::object();
  object["id"] = instance.id();
  object["n"] = instance.size();
  json coords = json::array();
  for (const auto& p : instance.coords()) coords.push_back({p.x, p.y});
  object["coords"] = std::move(coords);
  if (instance.opt_cost()) object["opt_cost"] = *instance.opt_cost();
  return object.dump();
}

std::string to_tsplib(const Instance& instance) {
  std::string out;
  out += "NAME : " + (instance.id().empty() ? std::string("unnamed") : instance.id()) + "\n";
  out += "TYPE : TSP\n";
  out += "DIMENSION : " + std::to_string(instance.size()) + "\n";
  out += "EDGE_WEIGHT_TYPE : EUC_2D\n";
  out += "NODE_COORD_SECTION\n";
  for (std::size_t k = 0; k < instance.size(); ++k) {
    out += std::to_string(k + 1) + " " + format_double(instance.coord(k).x) + " " +
           format_double(instance.coord(k).y) + "\n";
  }
  out += "EOF\n";
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidInput("cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw InvalidInput("write failed for " + path.string());
}

std::vector<Instance> load_dataset(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  const auto format =
      path.extension() == ".tsp" ? InstanceFormat::kTsplibEuc2d : InstanceFormat::kJsonl;
  return parse_instances(text, format);
}

void write_dataset(const std::filesystem::path& path, const std::vector<Instance>& instances) {
  std::string out;
  for (const auto& instance : instances) out += to_jsonl_line(instance) + "\n";
  write_file(path, out);
}

std::string to_json(const TourRecord& record) {
  json object = json::object();
  object["id"] = record.id;
  object["order"] = record.order;
  object["cost"] = record.cost;
  return object.dump();
}

TourRecord parse_tour_record(std::string_view text) {
  try {
    const json object = json::parse(text);
    TourRecord record;
    record.id = object.at("id").get<std::string>();
    record.order = object.at("order").get<Tour>();
    record.cost = object.contains("cost") ? object["cost"].get<double>() : 0.0;
    return record;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed tour record: ") + e.what());
  }
}

std::vector<TourRecord> load_tours(const std::filesystem::path& path) {
  std::vector<TourRecord> out;
  std::istringstream stream(read_file(path));
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(stream, raw)) {
    ++line_no;
    if (trim(raw).empty()) continue;
    try {
      out.push_back(parse_tour_record(raw));
    } catch (const ParseError& e) {
      throw ParseError(path.string() + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void write_tours(const std::filesystem::path& path, const std::vector<TourRecord>& tours) {
  std::string out;
  for (const auto& t : tours) out += to_json(t) + "\n";
  write_file(path, out);
}

}  // namespace nico
