use nalgebra::Vector3;

/// Voxel content. `Air` is the only non-solid block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Block {
    Air = 0,
    Floor = 1,
    Ceiling = 2,
    Wall = 3,
    Red = 4,
    Green = 5,
    Blue = 6,
    Yellow = 7,
    Stone = 8,
}

impl Block {
    const COLORED: [Block; 5] = [Block::Red, Block::Green, Block::Blue, Block::Yellow, Block::Stone];

    pub fn is_solid(self) -> bool {
        self != Block::Air
    }

    fn base_color(self) -> [u8; 3] {
        match self {
            Block::Air => [0, 0, 0],
            Block::Floor => [120, 104, 88],
            Block::Ceiling => [196, 196, 204],
            Block::Wall => [150, 150, 160],
            Block::Red => [200, 56, 48],
            Block::Green => [64, 176, 72],
            Block::Blue => [56, 88, 200],
            Block::Yellow => [220, 196, 64],
            Block::Stone => [96, 96, 100],
        }
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn hash(seed: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix(seed), |h, p| splitmix(h ^ p.wrapping_mul(0x2545_F491_4F6C_DD1D)))
}

/// Voxel grid with per-voxel colors. Voxels are unit cubes; `origin` is the
/// world position of the min corner of voxel `(0, 0, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub seed: u64,
    dims: [usize; 3],
    origin: Vector3<f64>,
    blocks: Vec<Block>,
    colors: Vec<[u8; 3]>,
}

const NX: usize = 48;
const NY: usize = 6;
const NZ: usize = 48;
const ROOM: usize = 8;

impl Scene {
    /// Room-and-corridor layout from `seed`. The world origin sits at eye
    /// height in the middle of an open start room.
    pub fn generate(seed: u64) -> Self {
        let mut b = SceneBuilder::new([NX, NY, NZ], Vector3::new(-(NX as f64) / 2.0, -1.5, -(NZ as f64) / 2.0));
        b.seed = seed;
        for x in 0..NX {
            for z in 0..NZ {
                b.set(x, 0, z, Block::Floor);
                b.set(x, NY - 1, z, Block::Ceiling);
                let border = x == 0 || z == 0 || x == NX - 1 || z == NZ - 1;
                if border {
                    for y in 1..NY - 1 {
                        b.set(x, y, z, Block::Wall);
                    }
                }
            }
        }

        // room walls on the lines x ≡ 4, z ≡ 4 (mod 8), each segment either
        // removed (open plan) or pierced by one doorway
        let lines: Vec<usize> = (0..NX).filter(|i| i % ROOM == 4).collect();
        for (axis, &line) in [0u64, 1].iter().flat_map(|a| lines.iter().map(move |l| (*a, l))) {
            for seg in 0..NX / ROOM {
                let h = hash(seed, &[1, axis, line as u64, seg as u64]);
                if h.is_multiple_of(5) {
                    continue;
                }
                let lo = seg * ROOM + 4 - ROOM / 2;
                let door = lo + 1 + ((h >> 8) % (ROOM as u64 - 3)) as usize;
                for s in lo..(lo + ROOM).min(NX) {
                    if s == door || s == door + 1 {
                        continue;
                    }
                    for y in 1..NY - 1 {
                        let (x, z) = if axis == 0 { (line, s) } else { (s, line) };
                        b.set(x, y, z, Block::Wall);
                    }
                }
            }
        }

        // colored pillars and blocks inside rooms
        for x in 1..NX - 1 {
            for z in 1..NZ - 1 {
                if x % ROOM == 4 || z % ROOM == 4 {
                    continue;
                }
                let h = hash(seed, &[2, x as u64, z as u64]);
                if h % 100 < 9 {
                    let kind = Block::COLORED[((h >> 16) % Block::COLORED.len() as u64) as usize];
                    let height = 1 + ((h >> 24) % (NY as u64 - 2)) as usize;
                    for y in 1..=height {
                        b.set(x, y, z, kind);
                    }
                }
            }
        }

        // keep the start room open around the origin
        let c = NX / 2;
        for x in c - 3..c + 3 {
            for z in c - 3..c + 3 {
                for y in 1..NY - 1 {
                    b.set(x, y, z, Block::Air);
                }
            }
        }
        b.build()
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn origin(&self) -> Vector3<f64> {
        self.origin
    }

    fn index(&self, x: usize, y: usize, z: usize) -> usize {
        (z * self.dims[1] + y) * self.dims[0] + x
    }

    pub fn in_bounds(&self, c: [i64; 3]) -> bool {
        (0..3).all(|i| c[i] >= 0 && (c[i] as usize) < self.dims[i])
    }

    pub fn block(&self, c: [i64; 3]) -> Block {
        if !self.in_bounds(c) {
            return Block::Air;
        }
        self.blocks[self.index(c[0] as usize, c[1] as usize, c[2] as usize)]
    }

    pub fn color(&self, c: [i64; 3]) -> [u8; 3] {
        self.colors[self.index(c[0] as usize, c[1] as usize, c[2] as usize)]
    }

    /// Voxel containing a world-space point.
    pub fn cell_of(&self, p: &Vector3<f64>) -> [i64; 3] {
        let q = p - self.origin;
        [q.x.floor() as i64, q.y.floor() as i64, q.z.floor() as i64]
    }
}

/// Explicit scene construction, used by `generate` and by tests that need a
/// hand-made layout.
#[derive(Debug, Clone)]
pub struct SceneBuilder {
    pub seed: u64,
    dims: [usize; 3],
    origin: Vector3<f64>,
    blocks: Vec<Block>,
    colors: Vec<Option<[u8; 3]>>,
}

impl SceneBuilder {
    pub fn new(dims: [usize; 3], origin: Vector3<f64>) -> Self {
        let n = dims[0] * dims[1] * dims[2];
        Self {
            seed: 0,
            dims,
            origin,
            blocks: vec![Block::Air; n],
            colors: vec![None; n],
        }
    }

    fn index(&self, x: usize, y: usize, z: usize) -> usize {
        (z * self.dims[1] + y) * self.dims[0] + x
    }

    pub fn set(&mut self, x: usize, y: usize, z: usize, block: Block) {
        let i = self.index(x, y, z);
        self.blocks[i] = block;
        self.colors[i] = None;
    }

    /// Sets a block with an exact color, bypassing the hashed variation.
    pub fn set_colored(&mut self, x: usize, y: usize, z: usize, block: Block, rgb: [u8; 3]) {
        let i = self.index(x, y, z);
        self.blocks[i] = block;
        self.colors[i] = Some(rgb);
    }

    pub fn build(self) -> Scene {
        let [nx, ny, _] = self.dims;
        let seed = self.seed;
        let colors = self
            .blocks
            .iter()
            .zip(&self.colors)
            .enumerate()
            .map(|(i, (block, fixed))| {
                if let Some(c) = fixed {
                    return *c;
                }
                let (x, y, z) = (i % nx, (i / nx) % ny, i / (nx * ny));
                let h = hash(seed, &[3, x as u64, y as u64, z as u64]);
                let base = block.base_color();
                let jitter = (h % 49) as i32 - 24;
                let mut out = [0u8; 3];
                for (k, o) in out.iter_mut().enumerate() {
                    let tint = ((h >> (8 + 8 * k)) % 17) as i32 - 8;
                    *o = (base[k] as i32 + jitter + tint).clamp(0, 255) as u8;
                }
                out
            })
            .collect();
        Scene {
            seed,
            dims: self.dims,
            origin: self.origin,
            blocks: self.blocks,
            colors,
        }
    }
}
