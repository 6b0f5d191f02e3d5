use super::RadioScene;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Crossings {
    pub buildings: usize,
    pub vehicles: usize,
}

/// Cells strictly between `from` and `to` that the center-to-center
/// segment touches, in traversal order. Where the segment passes exactly
/// through a cell corner, both side cells are included.
pub(crate) fn supercover_between(from: (usize, usize), to: (usize, usize)) -> Vec<(usize, usize)> {
    let (r0, c0) = (from.0 as i64, from.1 as i64);
    let (dr, dc) = (to.0 as i64 - r0, to.1 as i64 - c0);
    let (nr, nc) = (dr.abs(), dc.abs());
    let (sr, sc) = (dr.signum(), dc.signum());
    let (mut r, mut c) = (r0, c0);
    let (mut ir, mut ic) = (0i64, 0i64);
    let mut out = Vec::new();
    while ir < nr || ic < nc {
        // Compare the parameters (2ic+1)/(2nc) and (2ir+1)/(2nr) at which the
        // next column and row boundaries are crossed.
        let decision = (1 + 2 * ic) * nr - (1 + 2 * ir) * nc;
        if decision == 0 {
            out.push((r as usize, (c + sc) as usize));
            out.push(((r + sr) as usize, c as usize));
            r += sr;
            c += sc;
            ir += 1;
            ic += 1;
        } else if decision < 0 {
            c += sc;
            ic += 1;
        } else {
            r += sr;
            ir += 1;
        }
        out.push((r as usize, c as usize));
    }
    out.pop();
    out
}

/// Occupied cells strictly between the two endpoints crossed by the
/// segment joining their centers.
pub fn raycast_wall_crossings(scene: &RadioScene, from: (usize, usize), to: (usize, usize)) -> Crossings {
    let mut out = Crossings::default();
    for (r, c) in supercover_between(from, to) {
        if scene.buildings.get(r, c) {
            out.buildings += 1;
        }
        if scene.vehicles.as_ref().is_some_and(|v| v.get(r, c)) {
            out.vehicles += 1;
        }
    }
    out
}
