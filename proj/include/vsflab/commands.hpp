#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "vsflab/config.hpp"

namespace vsflab {

// Pipeline commands. Each is deterministic given (config, seed), talks to
// the world only through files, returns normally on success and throws
// Error otherwise. Commands that produce artifacts also archive the fully
// resolved configuration next to them.

// Writes gen.clips clip directories plus manifest.txt into out_dir;
// returns the manifest path.
std::string cmd_generate(const Config& cfg, const std::string& out_dir,
                         std::uint64_t seed);

// Trains `variant` on the manifest clips; writes params/, loss.csv and
// run.txt into out_dir.
void cmd_train(const Config& cfg, const std::string& manifest,
               const std::string& variant, const std::string& out_dir,
               std::uint64_t seed);

// Runs a training run's model over the manifest; writes report.json,
// report.txt, iou_density.csv and one detections CSV per clip into out_dir.
void cmd_eval(const Config& cfg, const std::string& run_dir,
              const std::string& manifest, const std::string& out_dir);

// Finite-difference verification for scope {tensorcore, vsf, detector, all};
// prints one line per check; returns the number of failing checks.
int cmd_gradcheck(const std::string& scope, std::uint64_t seed,
                  std::ostream& log);

// Scores every annotated ground-truth box in the manifest with the four
// scalar objectness measures; writes objectness.csv into out_dir.
void cmd_objectness(const Config& cfg, const std::string& manifest,
                    const std::string& out_dir);

// Re-exports data for inspection: a clip directory becomes PGM frames plus
// a box CSV; a tensor dump becomes either a coordinate CSV ("csv") or
// min-max normalized PGM slices over the trailing two axes ("pgm").
void cmd_export(const std::string& input, const std::string& format,
                const std::string& out_dir);

}  // namespace vsflab
