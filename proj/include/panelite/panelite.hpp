#ifndef PANELITE_PANELITE_HPP
#define PANELITE_PANELITE_HPP

#include "panelite/bootstrap.hpp"
#include "panelite/comparators.hpp"
#include "panelite/design.hpp"
#include "panelite/errors.hpp"
#include "panelite/gmm.hpp"
#include "panelite/group_report.hpp"
#include "panelite/lcm.hpp"
#include "panelite/panel.hpp"
#include "panelite/rng.hpp"
#include "panelite/select.hpp"
#include "panelite/simlab.hpp"
#include "panelite/stats.hpp"
#include "panelite/tables.hpp"

#endif  // PANELITE_PANELITE_HPP
