#pragma once
#include <vector>

namespace studio {

struct AudioBuffer {
    std::vector<float> samples;
    int channels = 2;
};

class Mixer {
public:
    void setGain(int track, float gain);
    void mixInto(AudioBuffer& out, const std::vector<AudioBuffer>& tracks);

private:
    std::vector<float> gains_;
};

}  // namespace studio
