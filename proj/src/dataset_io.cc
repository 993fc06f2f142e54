#include "symsfm/dataset_io.h"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <glog/logging.h>

#include "json.hpp"
#include "symsfm/errors.h"

namespace symsfm {
namespace {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

constexpr const char* kAxisKeys[3] = {"axis_x", "axis_y", "axis_z"};

// Walks a parsed document and reports schema problems with the field path.
class Reader {
 public:
  explicit Reader(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void Fail(const std::string& field,
                         const std::string& message) const {
    throw Error(ErrorCode::kParseError,
                source_ + ": field '" + field + "': " + message);
  }

  const Json& Require(const Json& object, const std::string& key,
                      const std::string& field) const {
    if (!object.is_object()) Fail(field, "expected an object");
    auto it = object.find(key);
    if (it == object.end()) Fail(Join(field, key), "missing");
    return *it;
  }

  const Json* Optional(const Json& object, const std::string& key) const {
    auto it = object.find(key);
    return it == object.end() ? nullptr : &*it;
  }

  double Number(const Json& value, const std::string& field) const {
    if (!value.is_number()) Fail(field, "expected a number");
    return value.get<double>();
  }

  int Integer(const Json& value, const std::string& field) const {
    if (!value.is_number_integer()) Fail(field, "expected an integer");
    return value.get<int>();
  }

  bool Bool(const Json& value, const std::string& field) const {
    if (!value.is_boolean()) Fail(field, "expected true or false");
    return value.get<bool>();
  }

  std::string String(const Json& value, const std::string& field) const {
    if (!value.is_string()) Fail(field, "expected a string");
    return value.get<std::string>();
  }

  const Json& Array(const Json& value, const std::string& field,
                    int size = -1) const {
    if (!value.is_array()) Fail(field, "expected an array");
    if (size >= 0 && static_cast<int>(value.size()) != size) {
      Fail(field, "expected " + std::to_string(size) + " entries");
    }
    return value;
  }

  template <int Rows>
  Eigen::Matrix<double, Rows, 1> Vector(const Json& value,
                                        const std::string& field) const {
    Array(value, field, Rows);
    Eigen::Matrix<double, Rows, 1> out;
    for (int i = 0; i < Rows; ++i) {
      out(i) = Number(value[i], Index(field, i));
    }
    return out;
  }

  Matrix23d Rotation(const Json& value, const std::string& field) const {
    Array(value, field, 2);
    Matrix23d out;
    out.row(0) = Vector<3>(value[0], Index(field, 0)).transpose();
    out.row(1) = Vector<3>(value[1], Index(field, 1)).transpose();
    return out;
  }

  static std::string Join(const std::string& field, const std::string& key) {
    return field.empty() ? key : field + "." + key;
  }
  static std::string Index(const std::string& field, size_t i) {
    return field + "[" + std::to_string(i) + "]";
  }

  const std::string& source() const { return source_; }

 private:
  std::string source_;
};

Json ParseText(const std::string& text, const std::string& source) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    const size_t end = std::min<size_t>(e.byte, text.size());
    const auto line =
        1 + std::count(text.begin(), text.begin() + static_cast<long>(end), '\n');
    throw Error(ErrorCode::kParseError, source + ": line " +
                                            std::to_string(line) + ": " +
                                            e.what());
  }
}

void CheckSchemaVersion(const Json& root, const Reader& reader) {
  const int version =
      reader.Integer(reader.Require(root, "schema_version", ""),
                     "schema_version");
  if (version != kSchemaVersion) {
    throw Error(ErrorCode::kSchemaVersionUnsupported,
                reader.source() + ": schema_version " +
                    std::to_string(version) + " (supported: " +
                    std::to_string(kSchemaVersion) + ")");
  }
}

std::vector<PairNames> ReadPairs(const Json& root, const Reader& reader) {
  const Json& pairs = reader.Array(reader.Require(root, "pairs", ""), "pairs");
  if (pairs.empty()) reader.Fail("pairs", "no keypoint pairs declared");
  std::vector<PairNames> out;
  std::set<std::string> seen;
  for (size_t i = 0; i < pairs.size(); ++i) {
    const std::string field = Reader::Index("pairs", i);
    reader.Array(pairs[i], field, 2);
    PairNames names{reader.String(pairs[i][0], Reader::Index(field, 0)),
                    reader.String(pairs[i][1], Reader::Index(field, 1))};
    for (const std::string& name : {names.first, names.second}) {
      if (name.empty()) reader.Fail(field, "empty keypoint name");
    }
    if (!seen.insert(names.first).second ||
        (names.second != names.first && !seen.insert(names.second).second)) {
      reader.Fail(field, "keypoint name used by more than one pair");
    }
    out.push_back(std::move(names));
  }
  return out;
}

// Keypoint name -> column index into [y, y_dag]. A self-paired name maps to
// its left column.
std::map<std::string, int> ColumnIndex(const std::vector<PairNames>& pairs) {
  std::map<std::string, int> index;
  const int num_pairs = static_cast<int>(pairs.size());
  for (int p = 0; p < num_pairs; ++p) {
    index.emplace(pairs[p].first, p);
    index.emplace(pairs[p].second, num_pairs + p);
  }
  return index;
}

// Column order used for writing named keypoints: each pair's left member
// followed by its right member, self-paired names once.
std::vector<int> WriteOrder(const std::vector<PairNames>& pairs) {
  std::vector<int> order;
  const int num_pairs = static_cast<int>(pairs.size());
  for (int p = 0; p < num_pairs; ++p) {
    order.push_back(p);
    if (pairs[p].second != pairs[p].first) order.push_back(num_pairs + p);
  }
  return order;
}

int Partner(const std::vector<PairNames>& pairs, int column) {
  const int num_pairs = static_cast<int>(pairs.size());
  const int p = column % num_pairs;
  if (pairs[p].first != pairs[p].second) return -1;
  return column < num_pairs ? column + num_pairs : column - num_pairs;
}

void SetColumn(KeypointImage& image, int column, const Eigen::Vector2d& point,
               bool visible) {
  const int num_pairs = image.NumPairs();
  if (column < num_pairs) {
    image.y.col(column) = point;
    image.vis[column] = visible;
  } else {
    image.y_dag.col(column - num_pairs) = point;
    image.vis_dag[column - num_pairs] = visible;
  }
}

KeypointImage ReadImage(const Json& value, const std::string& field,
                        const std::vector<PairNames>& pairs,
                        const std::map<std::string, int>& columns,
                        const Reader& reader) {
  const int num_pairs = static_cast<int>(pairs.size());
  KeypointImage image;
  image.id = reader.String(reader.Require(value, "id", field),
                           Reader::Join(field, "id"));
  image.y = Eigen::Matrix2Xd::Zero(2, num_pairs);
  image.y_dag = Eigen::Matrix2Xd::Zero(2, num_pairs);
  image.vis.assign(num_pairs, false);
  image.vis_dag.assign(num_pairs, false);

  const std::string kp_field = Reader::Join(field, "keypoints");
  const Json& keypoints = reader.Require(value, "keypoints", field);
  if (!keypoints.is_object()) reader.Fail(kp_field, "expected an object");
  for (auto it = keypoints.begin(); it != keypoints.end(); ++it) {
    const std::string name_field = Reader::Join(kp_field, it.key());
    auto column = columns.find(it.key());
    if (column == columns.end()) {
      reader.Fail(name_field, "keypoint not declared in pairs");
    }
    if (it.value().is_null()) continue;
    const Eigen::Vector2d point = reader.Vector<2>(it.value(), name_field);
    SetColumn(image, column->second, point, true);
    const int partner = Partner(pairs, column->second);
    if (partner >= 0) SetColumn(image, partner, point, true);
  }
  return image;
}

int CountVisibleNames(const KeypointImage& image,
                      const std::vector<PairNames>& pairs) {
  int count = 0;
  for (int column : WriteOrder(pairs)) count += image.IsVisible(column);
  return count;
}

ManhattanSpec ReadManhattan(const Json& value,
                            const std::map<std::string, int>& columns,
                            int num_columns, const Reader& reader) {
  ManhattanSpec spec;
  for (int k = 0; k < 3; ++k) {
    const std::string field = Reader::Join("manhattan", kAxisKeys[k]);
    const Json& axis = reader.Array(
        reader.Require(value, kAxisKeys[k], "manhattan"), field, 2);
    int ends[2];
    for (int e = 0; e < 2; ++e) {
      const std::string name = reader.String(axis[e], Reader::Index(field, e));
      auto column = columns.find(name);
      if (column == columns.end()) {
        reader.Fail(Reader::Index(field, e), "unknown keypoint '" + name + "'");
      }
      ends[e] = column->second;
    }
    spec.axes[k] = {ends[0], ends[1]};
  }
  try {
    spec.Validate(num_columns);
  } catch (const Error& e) {
    reader.Fail("manhattan", e.what());
  }
  return spec;
}

Groundtruth ReadGroundtruth(const Json& value,
                            const std::vector<PairNames>& pairs,
                            const Reader& reader) {
  const int num_pairs = static_cast<int>(pairs.size());
  Groundtruth gt;
  const Json& shape = reader.Require(value, "shape", "groundtruth");
  Eigen::Matrix3Xd full(3, 2 * num_pairs);
  for (int c = 0; c < 2 * num_pairs; ++c) {
    const std::string& name =
        c < num_pairs ? pairs[c].first : pairs[c - num_pairs].second;
    const std::string field = "groundtruth.shape." + name;
    full.col(c) =
        reader.Vector<3>(reader.Require(shape, name, "groundtruth.shape"),
                         field);
  }
  try {
    gt.shape = Structure3D::FromFull(full);
  } catch (const Error& e) {
    throw Error(ErrorCode::kMirrorViolation, reader.source() + ": " + e.what());
  }
  if (const Json* poses = reader.Optional(value, "poses")) {
    if (!poses->is_object()) reader.Fail("groundtruth.poses", "expected an object");
    for (auto it = poses->begin(); it != poses->end(); ++it) {
      gt.poses[it.key()] =
          reader.Rotation(it.value(), "groundtruth.poses." + it.key());
    }
  }
  return gt;
}

OrderedJson VectorJson(const Eigen::Ref<const Eigen::VectorXd>& v) {
  OrderedJson out = OrderedJson::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

OrderedJson RotationJson(const Matrix23d& r) {
  return OrderedJson::array({VectorJson(r.row(0).transpose()),
                             VectorJson(r.row(1).transpose())});
}

OrderedJson PointsJson(const Eigen::MatrixXd& points) {
  OrderedJson out = OrderedJson::array();
  for (Eigen::Index c = 0; c < points.cols(); ++c) {
    out.push_back(VectorJson(points.col(c)));
  }
  return out;
}

OrderedJson PairsJson(const std::vector<PairNames>& pairs) {
  OrderedJson out = OrderedJson::array();
  for (const auto& [left, right] : pairs) {
    out.push_back(OrderedJson::array({left, right}));
  }
  return out;
}

template <int Rows>
Eigen::Matrix<double, Rows, Eigen::Dynamic> ReadPoints(const Json& value,
                                                       const std::string& field,
                                                       int count,
                                                       const Reader& reader) {
  reader.Array(value, field, count);
  Eigen::Matrix<double, Rows, Eigen::Dynamic> out(Rows, count);
  for (int c = 0; c < count; ++c) {
    out.col(c) = reader.Vector<Rows>(value[c], Reader::Index(field, c));
  }
  return out;
}

std::vector<std::string> ReadStrings(const Json& root, const std::string& key,
                                     const Reader& reader) {
  std::vector<std::string> out;
  const Json* value = reader.Optional(root, key);
  if (value == nullptr) return out;
  reader.Array(*value, key);
  for (size_t i = 0; i < value->size(); ++i) {
    out.push_back(reader.String((*value)[i], Reader::Index(key, i)));
  }
  return out;
}

std::string FormatDouble(double value) {
  std::ostringstream out;
  out << std::setprecision(17) << value;
  return out.str();
}

}  // namespace

const std::string& Dataset::ColumnName(int column) const {
  const int num_pairs = NumPairs();
  return column < num_pairs ? pairs[column].first
                            : pairs[column - num_pairs].second;
}

Dataset ParseDataset(const std::string& text, int min_visible,
                     const std::string& source) {
  const Json root = ParseText(text, source);
  const Reader reader(source);
  if (!root.is_object()) reader.Fail("", "document must be an object");
  CheckSchemaVersion(root, reader);

  Dataset dataset;
  dataset.pairs = ReadPairs(root, reader);
  const auto columns = ColumnIndex(dataset.pairs);

  const Json& images =
      reader.Array(reader.Require(root, "images", ""), "images");
  std::set<std::string> ids;
  for (size_t i = 0; i < images.size(); ++i) {
    const std::string field = Reader::Index("images", i);
    KeypointImage image =
        ReadImage(images[i], field, dataset.pairs, columns, reader);
    if (!ids.insert(image.id).second) {
      reader.Fail(Reader::Join(field, "id"), "duplicate image id '" + image.id + "'");
    }
    const int visible = CountVisibleNames(image, dataset.pairs);
    if (visible < min_visible) {
      dataset.dropped_images.push_back(image.id);
      dataset.warnings.push_back("image '" + image.id + "' dropped: " +
                                 std::to_string(visible) +
                                 " visible keypoints");
      LOG(WARNING) << source << ": " << dataset.warnings.back();
      continue;
    }
    dataset.images.push_back(std::move(image));
  }
  if (!dataset.dropped_images.empty()) {
    LOG(WARNING) << source << ": dropped " << dataset.dropped_images.size()
                 << " image(s) with fewer than " << min_visible
                 << " visible keypoints";
  }

  if (const Json* manhattan = reader.Optional(root, "manhattan")) {
    dataset.manhattan =
        ReadManhattan(*manhattan, columns, 2 * dataset.NumPairs(), reader);
  }
  if (const Json* gt = reader.Optional(root, "groundtruth")) {
    dataset.groundtruth = ReadGroundtruth(*gt, dataset.pairs, reader);
  }
  return dataset;
}

Dataset LoadDataset(const std::filesystem::path& path, int min_visible) {
  return ParseDataset(ReadTextFile(path), min_visible, path.string());
}

std::string DatasetToString(const Dataset& dataset) {
  const std::vector<int> order = WriteOrder(dataset.pairs);

  OrderedJson root;
  root["schema_version"] = kSchemaVersion;
  root["pairs"] = PairsJson(dataset.pairs);
  if (dataset.manhattan) {
    OrderedJson axes;
    for (int k = 0; k < 3; ++k) {
      const auto [a, b] = dataset.manhattan->axes[k];
      axes[kAxisKeys[k]] =
          OrderedJson::array({dataset.ColumnName(a), dataset.ColumnName(b)});
    }
    root["manhattan"] = axes;
  }
  OrderedJson images = OrderedJson::array();
  for (const KeypointImage& image : dataset.images) {
    OrderedJson keypoints = OrderedJson::object();
    for (int c : order) {
      keypoints[dataset.ColumnName(c)] =
          image.IsVisible(c) ? VectorJson(image.Point(c)) : OrderedJson();
    }
    OrderedJson entry;
    entry["id"] = image.id;
    entry["keypoints"] = keypoints;
    images.push_back(entry);
  }
  root["images"] = images;
  if (dataset.groundtruth) {
    const Eigen::Matrix3Xd full = dataset.groundtruth->shape.Full();
    OrderedJson shape = OrderedJson::object();
    for (int c : order) shape[dataset.ColumnName(c)] = VectorJson(full.col(c));
    OrderedJson poses = OrderedJson::object();
    for (const auto& [id, rotation] : dataset.groundtruth->poses) {
      poses[id] = RotationJson(rotation);
    }
    root["groundtruth"] = {{"shape", shape}, {"poses", poses}};
  }
  return root.dump(2) + "\n";
}

void SaveDataset(const Dataset& dataset, const std::filesystem::path& path) {
  WriteTextFile(path, DatasetToString(dataset));
}

Dataset DatasetFromScene(const Scene& scene, bool with_groundtruth) {
  Dataset dataset;
  const int num_pairs = scene.shape.NumPairs();
  for (int p = 0; p < num_pairs; ++p) {
    const std::string stem = "p" + std::to_string(p);
    dataset.pairs.emplace_back(stem + "_left", stem + "_right");
  }
  dataset.images = scene.images;
  dataset.manhattan = scene.manhattan;
  if (with_groundtruth) {
    Groundtruth gt;
    gt.shape = scene.shape;
    for (size_t n = 0; n < scene.images.size(); ++n) {
      gt.poses[scene.images[n].id] = scene.poses[n].R;
    }
    dataset.groundtruth = std::move(gt);
  }
  return dataset;
}

ReconstructionResult ResultFromSingle(
    const Dataset& dataset,
    const std::vector<std::pair<std::string, SingleImageResult>>& results,
    const std::vector<ImageFailure>& failures, bool all_signs) {
  ReconstructionResult result;
  result.method = "single";
  result.pairs = dataset.pairs;
  for (const auto& [id, single] : results) {
    ImageResult image;
    image.id = id;
    image.pose = single.pose;
    image.shape = single.shape;
    if (all_signs) {
      for (const CameraPose& member : single.sign_family) {
        image.sign_family.push_back(member.R);
      }
    }
    result.images.push_back(std::move(image));
  }
  result.dropped_images = dataset.dropped_images;
  result.warnings = dataset.warnings;
  result.failures = failures;
  return result;
}

ReconstructionResult ResultFromMulti(const Dataset& dataset,
                                     const MultiImageResult& multi) {
  ReconstructionResult result;
  result.method = "multi";
  result.pairs = dataset.pairs;
  const int num_pairs = dataset.NumPairs();
  for (size_t n = 0; n < multi.image_ids.size(); ++n) {
    ImageResult image;
    image.id = multi.image_ids[n];
    image.pose = multi.poses[n];
    Eigen::Matrix2Xd filled(2, 2 * num_pairs);
    filled << multi.filled.y.middleRows<2>(2 * n),
        multi.filled.y_dag.middleRows<2>(2 * n);
    image.filled = filled;
    image.imputed.resize(2 * num_pairs);
    for (int p = 0; p < num_pairs; ++p) {
      image.imputed[p] = !multi.filled.vis(n, p);
      image.imputed[num_pairs + p] = !multi.filled.vis_dag(n, p);
    }
    result.images.push_back(std::move(image));
  }
  result.shape = multi.shape;
  result.energy_trace = multi.energy_trace;
  result.converged = multi.converged;
  result.iterations = multi.iterations;
  result.dropped_images = dataset.dropped_images;
  result.dropped_images.insert(result.dropped_images.end(),
                               multi.dropped_images.begin(),
                               multi.dropped_images.end());
  result.warnings = dataset.warnings;
  result.warnings.insert(result.warnings.end(), multi.warnings.begin(),
                         multi.warnings.end());
  return result;
}

Metrics Evaluate(const ReconstructionResult& result,
                 const Groundtruth& groundtruth) {
  std::vector<CameraPose> poses;
  std::vector<CameraPose> gt_poses;
  std::vector<Structure3D> shapes;
  Metrics metrics;
  for (const ImageResult& image : result.images) {
    auto gt = groundtruth.poses.find(image.id);
    if (gt == groundtruth.poses.end()) continue;
    if (result.method == "single") {
      if (!image.shape) continue;
      shapes.push_back(*image.shape);
    }
    poses.push_back(image.pose);
    CameraPose gt_pose;
    gt_pose.R = gt->second;
    gt_poses.push_back(gt_pose);
    metrics.image_ids.push_back(image.id);
  }
  if (poses.empty()) {
    throw Error(ErrorCode::kLengthMismatch,
                "no reconstructed image has a groundtruth pose");
  }

  EvalReport report;
  if (result.method == "single") {
    report = EvaluatePerImage(poses, shapes, gt_poses, groundtruth.shape);
  } else {
    if (!result.shape) {
      throw Error(ErrorCode::kLengthMismatch, "multi-image result has no shape");
    }
    report = EvaluateJoint(poses, *result.shape, gt_poses, groundtruth.shape);
  }
  metrics.rotation_error = report.rotation_error;
  metrics.shape_error = report.shape_error;
  metrics.mirrored = report.mirrored;
  metrics.per_image_rotation_error = report.per_image_rotation_error;
  metrics.per_image_shape_error = report.per_image_shape_error;
  return metrics;
}

std::string ResultToString(const ReconstructionResult& result) {
  OrderedJson root;
  root["schema_version"] = kSchemaVersion;
  root["method"] = result.method;
  root["pairs"] = PairsJson(result.pairs);
  OrderedJson images = OrderedJson::array();
  for (const ImageResult& image : result.images) {
    OrderedJson entry;
    entry["id"] = image.id;
    entry["R"] = RotationJson(image.pose.R);
    entry["t"] = VectorJson(image.pose.t);
    if (image.shape) entry["shape"] = PointsJson(image.shape->Full());
    if (!image.sign_family.empty()) {
      OrderedJson family = OrderedJson::array();
      for (const Matrix23d& r : image.sign_family) family.push_back(RotationJson(r));
      entry["sign_family"] = family;
    }
    if (image.filled) {
      entry["filled"] = PointsJson(*image.filled);
      entry["imputed"] = image.imputed;
    }
    images.push_back(entry);
  }
  root["images"] = images;
  if (result.shape) root["shape"] = PointsJson(result.shape->Full());
  root["energy_trace"] = result.energy_trace;
  root["converged"] = result.converged;
  root["iterations"] = result.iterations;
  root["dropped_images"] = result.dropped_images;
  root["warnings"] = result.warnings;
  OrderedJson failures = OrderedJson::array();
  for (const ImageFailure& failure : result.failures) {
    failures.push_back({{"id", failure.id}, {"error", failure.error}});
  }
  root["failures"] = failures;
  if (result.metrics) {
    const Metrics& m = *result.metrics;
    OrderedJson metrics;
    metrics["e_R"] = m.rotation_error;
    metrics["e_S"] = m.shape_error;
    metrics["mirrored"] = m.mirrored;
    metrics["image_ids"] = m.image_ids;
    metrics["per_image_rotation_error"] = m.per_image_rotation_error;
    metrics["per_image_shape_error"] = m.per_image_shape_error;
    root["metrics"] = metrics;
  }
  return root.dump(2) + "\n";
}

ReconstructionResult ParseResult(const std::string& text,
                                 const std::string& source) {
  const Json root = ParseText(text, source);
  const Reader reader(source);
  if (!root.is_object()) reader.Fail("", "document must be an object");
  CheckSchemaVersion(root, reader);

  ReconstructionResult result;
  result.method = reader.String(reader.Require(root, "method", ""), "method");
  if (result.method != "single" && result.method != "multi") {
    reader.Fail("method", "expected \"single\" or \"multi\"");
  }
  result.pairs = ReadPairs(root, reader);
  const int num_columns = 2 * static_cast<int>(result.pairs.size());

  auto read_shape = [&](const Json& value, const std::string& field) {
    try {
      return Structure3D::FromFull(
          ReadPoints<3>(value, field, num_columns, reader));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kMirrorViolation) throw;
      throw Error(ErrorCode::kMirrorViolation,
                  source + ": field '" + field + "': " + e.what());
    }
  };

  const Json& images =
      reader.Array(reader.Require(root, "images", ""), "images");
  for (size_t i = 0; i < images.size(); ++i) {
    const std::string field = Reader::Index("images", i);
    const Json& entry = images[i];
    ImageResult image;
    image.id = reader.String(reader.Require(entry, "id", field),
                             Reader::Join(field, "id"));
    image.pose.R = reader.Rotation(reader.Require(entry, "R", field),
                                   Reader::Join(field, "R"));
    image.pose.t = reader.Vector<2>(reader.Require(entry, "t", field),
                                    Reader::Join(field, "t"));
    if (const Json* shape = reader.Optional(entry, "shape")) {
      image.shape = read_shape(*shape, Reader::Join(field, "shape"));
    }
    if (const Json* family = reader.Optional(entry, "sign_family")) {
      const std::string family_field = Reader::Join(field, "sign_family");
      reader.Array(*family, family_field);
      for (size_t k = 0; k < family->size(); ++k) {
        image.sign_family.push_back(
            reader.Rotation((*family)[k], Reader::Index(family_field, k)));
      }
    }
    if (const Json* filled = reader.Optional(entry, "filled")) {
      image.filled = ReadPoints<2>(*filled, Reader::Join(field, "filled"),
                                   num_columns, reader);
      const std::string imputed_field = Reader::Join(field, "imputed");
      const Json& imputed = reader.Array(
          reader.Require(entry, "imputed", field), imputed_field, num_columns);
      for (int c = 0; c < num_columns; ++c) {
        image.imputed.push_back(
            reader.Bool(imputed[c], Reader::Index(imputed_field, c)));
      }
    }
    result.images.push_back(std::move(image));
  }
  if (const Json* shape = reader.Optional(root, "shape")) {
    result.shape = read_shape(*shape, "shape");
  }
  if (const Json* trace = reader.Optional(root, "energy_trace")) {
    reader.Array(*trace, "energy_trace");
    for (size_t i = 0; i < trace->size(); ++i) {
      result.energy_trace.push_back(
          reader.Number((*trace)[i], Reader::Index("energy_trace", i)));
    }
  }
  if (const Json* converged = reader.Optional(root, "converged")) {
    result.converged = reader.Bool(*converged, "converged");
  }
  if (const Json* iterations = reader.Optional(root, "iterations")) {
    result.iterations = reader.Integer(*iterations, "iterations");
  }
  result.dropped_images = ReadStrings(root, "dropped_images", reader);
  result.warnings = ReadStrings(root, "warnings", reader);
  if (const Json* failures = reader.Optional(root, "failures")) {
    reader.Array(*failures, "failures");
    for (size_t i = 0; i < failures->size(); ++i) {
      const std::string field = Reader::Index("failures", i);
      result.failures.push_back(
          {reader.String(reader.Require((*failures)[i], "id", field),
                         Reader::Join(field, "id")),
           reader.String(reader.Require((*failures)[i], "error", field),
                         Reader::Join(field, "error"))});
    }
  }
  if (const Json* metrics = reader.Optional(root, "metrics")) {
    Metrics m;
    m.rotation_error =
        reader.Number(reader.Require(*metrics, "e_R", "metrics"), "metrics.e_R");
    m.shape_error =
        reader.Number(reader.Require(*metrics, "e_S", "metrics"), "metrics.e_S");
    if (const Json* mirrored = reader.Optional(*metrics, "mirrored")) {
      m.mirrored = reader.Bool(*mirrored, "metrics.mirrored");
    }
    m.image_ids = ReadStrings(*metrics, "image_ids", reader);
    for (const char* key :
         {"per_image_rotation_error", "per_image_shape_error"}) {
      const Json* values = reader.Optional(*metrics, key);
      if (values == nullptr) continue;
      const std::string field = Reader::Join("metrics", key);
      reader.Array(*values, field);
      auto& out = std::string(key) == "per_image_rotation_error"
                      ? m.per_image_rotation_error
                      : m.per_image_shape_error;
      for (size_t i = 0; i < values->size(); ++i) {
        out.push_back(reader.Number((*values)[i], Reader::Index(field, i)));
      }
    }
    result.metrics = m;
  }
  return result;
}

void SaveResult(const ReconstructionResult& result,
                const std::filesystem::path& path) {
  WriteTextFile(path, ResultToString(result));
}

ReconstructionResult LoadResult(const std::filesystem::path& path) {
  return ParseResult(ReadTextFile(path), path.string());
}

void ExportPoints(const ReconstructionResult& result,
                  const std::filesystem::path& path) {
  const Structure3D* shape = result.shape ? &*result.shape : nullptr;
  for (const ImageResult& image : result.images) {
    if (shape == nullptr && image.shape) shape = &*image.shape;
  }
  if (shape == nullptr) {
    throw Error(ErrorCode::kIoError, "result has no structure to export");
  }
  const int num_pairs = shape->NumPairs();
  const Eigen::Matrix3Xd left = shape->Left();
  const Eigen::Matrix3Xd right = shape->Right();

  std::ostringstream out;
  out << "ply\nformat ascii 1.0\n"
      << "element vertex " << 2 * num_pairs << "\n"
      << "property double x\nproperty double y\nproperty double z\n"
      << "end_header\n";
  for (int p = 0; p < num_pairs; ++p) {
    for (const Eigen::Matrix3Xd* side : {&left, &right}) {
      out << FormatDouble((*side)(0, p)) << " " << FormatDouble((*side)(1, p))
          << " " << FormatDouble((*side)(2, p)) << "\n";
    }
  }
  WriteTextFile(path, out.str());
}

void WriteTrace(const std::vector<IterationRecord>& trace,
                const std::filesystem::path& path) {
  std::ostringstream out;
  out << "iteration,energy,max_orthogonality_violation\n";
  for (const IterationRecord& record : trace) {
    out << record.iteration << "," << FormatDouble(record.energy) << ","
        << FormatDouble(record.max_orthogonality_violation) << "\n";
  }
  WriteTextFile(path, out.str());
}

std::string ReadTextFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void WriteTextFile(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::kIoError, "failed writing " + path.string());
}

}  // namespace symsfm
