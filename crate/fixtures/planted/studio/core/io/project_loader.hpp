#pragma once
#include <string>

namespace studio {

struct Project {
    std::string name;
    int frameRate = 30;
};

class ProjectLoader {
public:
    bool load(const std::string& path, Project& out);
    bool save(const std::string& path, const Project& project);
};

}  // namespace studio
