#include "project_loader.hpp"
#include <fstream>

namespace studio {

bool ProjectLoader::load(const std::string& path, Project& out) {
    std::ifstream in(path);
    if (!in) {
        return false;
    }
    std::getline(in, out.name);
    in >> out.frameRate;
    return true;
}

bool ProjectLoader::save(const std::string& path, const Project& project) {
    std::ofstream file(path);
    file << project.name << "\n" << project.frameRate << "\n";
    return static_cast<bool>(file);
}

}  // namespace studio
