#pragma once

// JSON forms of the library's value types. Numbers are written in shortest
// round-trip form, so every double reloads bit-exactly.

#include <filesystem>
#include <string>

#include <json.hpp>

#include "orthomatch/geometry.hpp"
#include "orthomatch/matching.hpp"
#include "orthomatch/ortho_view.hpp"
#include "orthomatch/synth.hpp"

namespace orthomatch {

using Json = nlohmann::ordered_json;

Json matrix_to_json(const Mat3& m);  // row-major 9-array
Mat3 matrix_from_json(const Json& j);
Json vector_to_json(const Vec3& v);
Vec3 vector3_from_json(const Json& j);

Json to_json(const Homographyd& h);  // {"h": [...]}
Homographyd homography_from_json(const Json& j);
Json to_json(const Intrinsicsd& k);  // {"k": [...]}
Intrinsicsd intrinsics_from_json(const Json& j);
Json to_json(const Posed& p);        // {"r": [...], "t": [...]}
Posed pose_from_json(const Json& j);

/// {"set_a", "set_b", "pairs": [[ia, ib, distance, head], ...], "points": [[xa, ya, xb, yb], ...]}
Json to_json(const MatchSet& ms);
MatchSet match_set_from_json(const Json& j);

Json to_json(const RansacResult& r);

/// {"mode", "h_ortho", "out_w", "out_h", "plane": {"n", "d", "rms"}} or {..., "pairs": [[sx, sy, tx, ty], ...]}
Json to_json(const OrthoSpec& spec);
OrthoSpec ortho_spec_from_json(const Json& j);

Json to_json(const SynthConfig& c);
SynthConfig synth_config_from_json(const Json& j);
Json to_json(const PairSpec& s);
PairSpec pair_spec_from_json(const Json& j);
Json to_json(const CorpusManifest& m);
CorpusManifest corpus_manifest_from_json(const Json& j);

std::string dump_json(const Json& j);
Json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace orthomatch
