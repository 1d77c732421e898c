/// Greedy graph coloring of constraints that share vertices. Returns the
/// projection order (by color, then index) and the number of colors.
/// Constraints within one color touch disjoint vertices, so a color can be
/// projected in any order or in parallel with identical results; the fixed
/// order keeps the sequential sweep deterministic.
pub fn color_order(stencils: impl Iterator<Item = Vec<usize>>, num_vertices: usize) -> (Vec<usize>, usize) {
    let stencils: Vec<Vec<usize>> = stencils.collect();
    // Colors already used at each vertex, as a bit set per 64 colors.
    let mut used: Vec<Vec<u64>> = vec![Vec::new(); num_vertices];
    let mut color = vec![0usize; stencils.len()];
    let mut num_colors = 0;
    for (ci, s) in stencils.iter().enumerate() {
        let mut c = 0;
        loop {
            let (word, bit) = (c / 64, c % 64);
            let taken = s.iter().any(|&v| used[v].get(word).is_some_and(|w| w & (1 << bit) != 0));
            if !taken {
                break;
            }
            c += 1;
        }
        color[ci] = c;
        num_colors = num_colors.max(c + 1);
        for &v in s {
            let (word, bit) = (c / 64, c % 64);
            if used[v].len() <= word {
                used[v].resize(word + 1, 0);
            }
            used[v][word] |= 1 << bit;
        }
    }
    let mut order: Vec<usize> = (0..stencils.len()).collect();
    order.sort_by_key(|&i| (color[i], i));
    (order, num_colors)
}
