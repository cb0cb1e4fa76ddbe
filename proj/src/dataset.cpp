#include "l2l/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "l2l/error.hpp"
#include "l2l/rng.hpp"
#include "l2l/tensor_io.hpp"

namespace l2l {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ManifestError, "cannot open " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    rows.push_back(split_csv_line(line));
  }
  return rows;
}

std::size_t parse_id(const std::string& s, const std::filesystem::path& file, std::size_t row) {
  try {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw Error(ErrorCode::ManifestError, file.string() + " row " + std::to_string(row) + ": bad sample id '" + s + "'");
  }
}

std::uint8_t parse_binary(const std::string& s, const std::filesystem::path& file, std::size_t row, std::size_t col) {
  if (s == "0") return 0;
  if (s == "1") return 1;
  throw Error(ErrorCode::LabelDomainError, file.string() + " row " + std::to_string(row) + " column " +
                                               std::to_string(col) + ": value '" + s + "' is not 0 or 1");
}

}  // namespace

const std::vector<std::size_t>& Dataset::split(const std::string& name) const {
  auto it = splits.find(name);
  if (it == splits.end()) throw Error(ErrorCode::ManifestError, "dataset has no split '" + name + "'");
  return it->second;
}

std::size_t Dataset::index_of(std::size_t id) const {
  auto it = std::lower_bound(samples.begin(), samples.end(), id,
                             [](const DatasetSample& s, std::size_t v) { return s.id < v; });
  if (it == samples.end() || it->id != id) {
    throw Error(ErrorCode::SampleNotFound, "sample id " + std::to_string(id) + " not in dataset");
  }
  return static_cast<std::size_t>(it - samples.begin());
}

Dataset load_dataset(const std::filesystem::path& manifest_path) {
  std::filesystem::path path = manifest_path;
  if (std::filesystem::is_directory(path)) path /= "manifest.json";
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ManifestError, "cannot open manifest " + path.string());
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ManifestError, path.string() + ": " + e.what());
  }

  Dataset ds;
  ds.root = path.parent_path();
  std::string labels_file, pattern;
  std::optional<std::string> hidden_file;
  std::vector<std::size_t> image_shape;
  try {
    ds.attribute_names = manifest.at("attribute_names").get<std::vector<std::string>>();
    image_shape = manifest.at("image_shape").get<std::vector<std::size_t>>();
    labels_file = manifest.at("labels").get<std::string>();
    pattern = manifest.at("image_pattern").get<std::string>();
    if (manifest.contains("hidden")) hidden_file = manifest["hidden"].get<std::string>();
    if (manifest.contains("generator")) ds.generator = SynthSpec::from_json(manifest["generator"]);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ManifestError, path.string() + ": " + e.what());
  }
  const std::size_t m = ds.attribute_names.size();
  if (m == 0) throw Error(ErrorCode::ManifestError, path.string() + ": no attributes");
  if (image_shape.size() != 3 || image_shape[0] != image_shape[1]) {
    throw Error(ErrorCode::ManifestError, path.string() + ": image_shape must be [S, S, C]");
  }
  ds.image_size = image_shape[0];
  ds.channels = image_shape[2];
  const auto id_pos = pattern.find("{id}");
  if (id_pos == std::string::npos) throw Error(ErrorCode::ManifestError, "image_pattern lacks {id}");

  const auto label_path = ds.root / labels_file;
  const auto rows = read_csv(label_path);
  if (rows.empty()) throw Error(ErrorCode::ManifestError, label_path.string() + " is empty");
  if (rows.front().size() != m + 1) {
    throw Error(ErrorCode::ManifestError, label_path.string() + ": header has " + std::to_string(rows.front().size()) +
                                              " columns, expected " + std::to_string(m + 1));
  }
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != m + 1) {
      throw Error(ErrorCode::ManifestError, label_path.string() + " row " + std::to_string(r) + ": wrong column count");
    }
    DatasetSample s;
    s.id = parse_id(rows[r][0], label_path, r);
    s.labels.resize(m);
    for (std::size_t j = 0; j < m; ++j) s.labels[j] = parse_binary(rows[r][j + 1], label_path, r, j + 1);
    ds.samples.push_back(std::move(s));
  }
  if (manifest.contains("num_samples") && manifest["num_samples"].get<std::size_t>() != ds.samples.size()) {
    throw Error(ErrorCode::ManifestError, "manifest counts " + manifest["num_samples"].dump() + " samples, " +
                                              label_path.string() + " has " + std::to_string(ds.samples.size()));
  }
  std::sort(ds.samples.begin(), ds.samples.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < ds.samples.size(); ++i) {
    if (ds.samples[i].id == ds.samples[i - 1].id) {
      throw Error(ErrorCode::ManifestError, "duplicate sample id " + std::to_string(ds.samples[i].id));
    }
  }

  for (auto& s : ds.samples) {
    std::string name = pattern;
    name.replace(id_pos, 4, std::to_string(s.id));
    const Tensor img = read_tensor(ds.root / name);
    if (img.shape() != Shape{ds.image_size, ds.image_size, ds.channels}) {
      throw Error(ErrorCode::TensorFormatError, (ds.root / name).string() + ": shape " + shape_to_string(img.shape()) +
                                                    " does not match manifest image_shape");
    }
    s.image.assign(img.data().begin(), img.data().end());
  }

  if (hidden_file) {
    const auto hidden_path = ds.root / *hidden_file;
    const auto hrows = read_csv(hidden_path);
    const std::size_t k = ds.generator ? ds.generator->num_factors : 0;
    if (hrows.size() != ds.samples.size() + 1) {
      throw Error(ErrorCode::ManifestError, hidden_path.string() + ": row count differs from labels");
    }
    for (std::size_t r = 1; r < hrows.size(); ++r) {
      if (hrows[r].size() != 1 + k + m) {
        throw Error(ErrorCode::ManifestError, hidden_path.string() + " row " + std::to_string(r) + ": wrong column count");
      }
      auto& s = ds.samples[ds.index_of(parse_id(hrows[r][0], hidden_path, r))];
      s.occluded.resize(m);
      for (std::size_t j = 0; j < m; ++j) s.occluded[j] = parse_binary(hrows[r][1 + k + j], hidden_path, r, 1 + k + j);
    }
  }

  if (manifest.contains("splits")) {
    for (const auto& [name, ids] : manifest["splits"].items()) {
      std::vector<std::size_t> idx;
      for (const auto& id : ids) idx.push_back(ds.index_of(id.get<std::size_t>()));
      ds.splits[name] = std::move(idx);
    }
  }
  if (ds.splits.empty()) {
    std::vector<std::size_t> all(ds.samples.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    ds.splits["train"] = all;
  }
  return ds;
}

std::vector<std::size_t> epoch_order(const std::vector<std::size_t>& indices, std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> order = indices;
  Rng rng = Rng::derive(seed, 0xE90C0000ULL + epoch);
  rng.shuffle(order);
  return order;
}

}  // namespace l2l
