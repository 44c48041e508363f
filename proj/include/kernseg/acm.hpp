#pragma once

#include <Eigen/Dense>

#include <vector>

#include "kernseg/imaging.hpp"

namespace kernseg {

/// Level-set function on the pixel grid (rows = image height). Positive inside the region.
struct LevelSet {
    Eigen::MatrixXd phi;
    int iteration = 0;
};

struct AcmConfig {
    int max_iters = 500;
    int reinit_every = 25;
    double step_size = 0.5;        // largest per-iteration change of phi, in pixels
    int stop_window = 10;          // iterations without strict energy decrease before stopping
    double mu = 0.1 * 255 * 255;   // weight of the perimeter term
    double dirac_width = 1.0;      // width of the smoothed delta function
    int backtrack_steps = 5;       // step halvings tried before declaring an energy increase

    void validate() const;
};

/// Signed Euclidean distance: +(d − ½) inside, −(d − ½) outside, where d is the center-to-center
/// distance to the nearest pixel of the other label.
LevelSet mask_to_sdf(const SegMask& mask);

/// Rebuilds phi as a signed distance from its current zero crossing by fast sweeping; the sign of
/// every pixel is preserved.
LevelSet reinitialize(const LevelSet& ls);

SegMask mask_from_levelset(const LevelSet& ls);

/// Σ_in (I − c₁)² + Σ_out (I − c₂)² + μ·perimeter, with the perimeter counted as 4-neighbor label
/// changes. An empty region takes the global mean.
double cv_energy(const ImageGrid& image, const LevelSet& ls, double mu = AcmConfig{}.mu);

struct AcmResult {
    SegMask mask;
    std::vector<double> energy_trace;  // initial energy followed by every accepted step
    LevelSet level_set;
    int iterations = 0;
};

/// Chan-Vese evolution from an initial mask. Steps that would raise the energy are backtracked; the
/// evolution stops when no step lowers it, after stop_window stalled iterations, or at max_iters.
AcmResult evolve(const ImageGrid& image, const SegMask& init, const AcmConfig& cfg);

}  // namespace kernseg
