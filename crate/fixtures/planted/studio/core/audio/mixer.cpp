#include "mixer.hpp"
#include <algorithm>

namespace studio {

static float clampSample(float v) {
    return std::max(-1.0f, std::min(1.0f, v));
}

void Mixer::setGain(int track, float gain) {
    if (track >= static_cast<int>(gains_.size())) {
        gains_.resize(track + 1, 1.0f);
    }
    gains_[track] = gain;
}

void Mixer::mixInto(AudioBuffer& out, const std::vector<AudioBuffer>& tracks) {
    for (size_t t = 0; t < tracks.size(); ++t) {
        float gain = t < gains_.size() ? gains_[t] : 1.0f;
        for (size_t i = 0; i < out.samples.size() && i < tracks[t].samples.size(); ++i) {
            out.samples[i] = clampSample(out.samples[i] + gain * tracks[t].samples[i]);
        }
    }
}

}  // namespace studio
