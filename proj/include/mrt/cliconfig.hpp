#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mrt/cgo.hpp"
#include "mrt/identities.hpp"
#include "mrt/inversion.hpp"
#include "mrt/phantom.hpp"
#include "mrt/raytransform.hpp"

namespace mrt {

// JSON-backed configuration for the command-line tool.  One config file
// drives every subcommand; each command reads the sections it needs and
// ignores the rest.  Defaults are chosen so an empty config (just the
// schema_version) runs a small 2-D demonstration of any command.
//
// Parsing is strict: unknown keys, wrong types, a schema_version other
// than 1, and non-positive tolerances are all rejected with a descriptive
// std::runtime_error, which the tool maps to exit code 2.

// Probe-ray source.  Exactly one of three modes applies, in this order:
//   path  - nonempty: load a ray-grid JSON file {"rays": [{"x": [...], "xi": [...]}]}
//   beam  - true: build the parallel-beam grid matching the pipeline geometry
//           (2-D only; rows come out angle-major, matching the inversion input)
//   else  - `count` deterministic unit-speed rays seeded by `seed`, base points
//           in the cube of half-width x_radius.
struct RayGridSpec {
  int count = 64;
  std::uint64_t seed = 11;
  double x_radius = 0.5;
  std::string path;
  bool beam = false;

  void validate() const;
};

// Pass/fail thresholds used by the verifying commands.  All must be > 0.
//   identity - relative tolerance for `verify` (residual <= identity * scale)
//   kernel   - membership tolerance handed to the null-space test
//   recovery - maximum acceptable relative L2 error for recovered fields
struct ToleranceSpec {
  double identity = 1e-3;
  double kernel = 1e-6;
  double recovery = 0.08;

  void validate() const;
};

struct RunConfig {
  int schema_version = 1;

  PhantomSpec phantom{};    // used whenever no bundle path is given
  double amplitude = 1.0;   // scales the generated phantom (0 = zero bundle)
  std::string bundle_path;  // directory of a previously saved bundle
  std::string moments_csv;  // moment-sample CSV (invert only)

  RayGridSpec rays{};
  QuadratureSpec quad{};
  FDStencil stencil{};
  std::vector<int> moments;  // transform: moment orders; empty = 0..top_rank

  PipelineConfig pipeline{};  // geometry fields only; quad/stencil/threads
                              // are stitched in from the fields above
  RecoveryConfig recovery{};  // likewise for stencil/threads

  ToleranceSpec tolerances{};
  std::string out_dir = "out";
  int threads = 0;  // 0 = auto (the MRT_THREADS environment variable caps it)

  void validate() const;
};

// Parse a config from JSON text / from a file.  Both throw std::runtime_error
// on malformed JSON, unknown keys, wrong types, out-of-range values, or an
// unsupported schema_version.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);

// Minimal structural validator for the JSON-schema subset used by the
// published schemas in schemas/ (type, enum, required, properties,
// additionalProperties, items, minimum/maximum/exclusiveMinimum, minItems,
// maxItems).  Returns human-readable violations; empty means the document
// conforms.  Throws std::runtime_error if either text is not valid JSON.
std::vector<std::string> schema_violations(const std::string& schema_text,
                                           const std::string& document_text);

}  // namespace mrt
