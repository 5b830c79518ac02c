#pragma once
#include <string>

namespace geo {

class Shape {
public:
    virtual ~Shape() = default;
    virtual double area() const = 0;
    std::string name() const;
};

class Circle : public Shape {
public:
    explicit Circle(double r);
    double area() const override;
private:
    double radius_;
};

}  // namespace geo
