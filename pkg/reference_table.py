"""
Published densest plane-group packing densities of regular n-gons
(n = 3..25) and of the disc, truncated at the fifth decimal place, together
with the density classes of plane groups whose densest disc packings agree.
"""

from typing import Dict, Optional, Tuple

from symmetry import get_group

COLUMNS = tuple(range(3, 26)) + ("disc",)

# One row per plane group, values in COLUMNS order
_DENSITIES: Dict[str, Tuple[float, ...]] = {
    "p2": (.99999, .99999, .92131, .99999, .89269, .90616, .90103, .91371, .90766, .92820,
        .90437, .90746, .90471, .90901, .90692, .91622, .90595, .90733, .90577, .90789, .90683,
        .91211, .90642, .90689),
    "p2gg": (.99999, .99999, .92131, .99999, .89269, .90616, .89989, .91371, .90766,
        .92820, .90437, .90746, .90403, .90901, .90692, .91622, .90595, .90733, .90536, .90789,
        .90683, .91211, .90642, .90689),
    "pg": (.99999, .99999, .92131, .99999, .89269, .90616, .89860, .91371, .90766, .92820,
        .90437, .90746, .90369, .90901, .90692, .91622, .90595, .90733, .90523, .90789, .90683,
        .91211, .90642, .90689),
    "p3": (.66666, .77376, .87048, .99999, .88085, .87665, .88773, .88775, .89896, .92820,
        .90005, .89722, .90017, .89950, .90348, .91622, .90379, .90218, .90349, .90300, .90500,
        .91211, .90513, .90689),
    "p1": (.66666, .99999, .81725, .99999, .86019, .90616, .88773, .91371, .88912, .92820,
        .89383, .90746, .90017, .90901, .89947, .91622, .90084, .90733, .90349, .90789, .90284,
        .91211, .90341, .90689),
    "p2mg": (.99999, .99999, .85410, .85714, .84226, .86555, .83419, .83722, .83116,
        .86156, .83306, .83823, .83993, .84856, .84215, .84346, .84189, .84571, .84052, .84068,
        .83929, .84662, .83952, .84178),
    "cm": (.99999, .99999, .85410, .85714, .84226, .86555, .83419, .83722, .82795, .86156,
        .83212, .83823, .83993, .84856, .84215, .84346, .84189, .84571, .84052, .84068, .83865,
        .84662, .83916, .84178),
    "p4": (.71281, .99999, .84211, .81776, .84219, .85031, .83030, .83004, .83780, .86156,
        .83691, .83527, .83765, .84613, .84190, .83945, .84177, .84367, .83971, .83933, .84072,
        .84662, .84061, .84178),
    "p4gm": (.69615, .99999, .71119, .74613, .76477, .82842, .76593, .77205, .77628,
        .80384, .77662, .77869, .78028, .79564, .78043, .78137, .78213, .79192, .78220, .78271,
        .78313, .78991, .78317, .78539),
    "c2mm": (.66666, .99999, .71714, .74999, .76253, .82842, .76697, .77254, .77570,
        .80384, .77697, .77882, .78006, .79564, .78058, .78141, .78202, .79192, .78229, .78273,
        .78307, .78991, .78322, .78539),
    "pm": (.49999, .99999, .69098, .74999, .73825, .82842, .75712, .77254, .76655, .80384,
        .77193, .77882, .77530, .79564, .77754, .78141, .77911, .79192, .78025, .78273, .78111,
        .78991, .78177, .78539),
    "p2mm": (.49999, .99999, .69098, .74999, .73825, .82842, .75712, .77254, .76655,
        .80384, .77193, .77882, .77530, .79564, .77754, .78141, .77911, .79192, .78025, .78273,
        .78111, .78991, .78177, .78539),
    "p6": (.99999, .72193, .75933, .85714, .75740, .76438, .78535, .76932, .77293, .79560,
        .77254, .77326, .77997, .77425, .77536, .78533, .77523, .77536, .77863, .77571, .77622,
        .78181, .77616, .77734),
    "p31m": (.74999, .66323, .70166, .71999, .72084, .71565, .73410, .71653, .72182,
        .74613, .72205, .72380, .73087, .72583, .72735, .72825, .72787, .72698, .72996, .72662,
        .72722, .73320, .72725, .72900),
    "p3m1": (.99999, .49742, .53854, .66666, .57196, .57980, .63041, .58887, .59164,
        .61880, .59535, .59664, .61359, .59851, .59921, .61081, .60029, .60071, .60915, .60139,
        .60166, .60807, .60211, .60459),
    "p4mm": (.57735, .49999, .55537, .52148, .51446, .56854, .52443, .53314, .54240,
        .53589, .54144, .53607, .53385, .54604, .53500, .53725, .54014, .53792, .53994, .53783,
        .53683, .54211, .53716, .53901),
    "p6mm": (.49999, .46410, .49372, .47999, .49025, .48235, .48940, .48305, .47750,
        .49742, .47995, .48454, .48724, .48518, .48675, .48550, .48660, .48548, .48664, .48542,
        .48409, .48880, .48418, .48600),
}

_CLASSES: Tuple[Tuple[str, ...], ...] = (
    ("p2", "p2gg", "pg", "p3", "p1"),
    ("p2mg", "cm", "p4"),
    ("p4gm", "c2mm", "pm", "p2mm"),
    ("p6",),
    ("p31m",),
    ("p3m1",),
    ("p4mm",),
    ("p6mm",),
)


def _column(n) -> object:
    if n is None or n == "disc":
        return "disc"
    if int(n) != n:
        raise ValueError(f"n must be an integer or 'disc', got {n!r}")
    return int(n)


def reference_density(group: str, n) -> Optional[float]:
    """
    Published densest density for `group` and an n-gon.

    Args:
        group: Plane group name (case-insensitive)
        n: Vertex count, or None / "disc" for the disc

    Returns:
        Truncated density, or None when n is outside the published range
    """
    name = get_group(group).name
    column = _column(n)
    if column not in COLUMNS:
        return None
    return _DENSITIES[name][COLUMNS.index(column)]


def density_classes() -> Tuple[Tuple[str, ...], ...]:
    """Plane groups grouped by equal densest disc density, densest class first."""
    return _CLASSES


def class_of(group: str) -> Tuple[str, ...]:
    name = get_group(group).name
    for members in _CLASSES:
        if name in members:
            return members
    raise ValueError(f"Plane group {name} has no density class")


def class_label(group: str) -> str:
    """Class named after its first member, e.g. 'p2-class'."""
    return f"{class_of(group)[0]}-class"
