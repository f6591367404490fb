/**
 * three.js view of one mesh with per-face state coloring and back-face
 * tinting. Faces are triangulated into a non-indexed geometry so each
 * triangle can carry its source face's color; a second mesh with a
 * BackSide material renders back-facing geometry dark red, matching the
 * repair tool's visual convention for broken winding.
 */

import * as THREE from "three";
import { Mesh as CoreMesh, faceCentroid } from "../core/mesh.js";

export type FaceState = "base" | "selected" | "context" | "patch";

const COLORS: Record<FaceState, THREE.Color> = {
  base: new THREE.Color(0xb8b8b8),
  selected: new THREE.Color(0x26a6ff), // target region blue
  context: new THREE.Color(0x73ccff), // context ring light blue
  patch: new THREE.Color(0x7ed98c), // freshly swapped-in patch
};
const BACKFACE_TINT = new THREE.Color(0x8f2113); // dark red

export class MeshView {
  readonly group = new THREE.Group();
  private geometry!: THREE.BufferGeometry;
  private triFace: number[] = [];
  private mesh: CoreMesh;

  constructor(mesh: CoreMesh) {
    this.mesh = mesh;
    this.rebuild(mesh);
  }

  get coreMesh(): CoreMesh {
    return this.mesh;
  }

  rebuild(mesh: CoreMesh): void {
    this.mesh = mesh;
    this.group.clear();
    const positions: number[] = [];
    this.triFace = [];
    mesh.faces.forEach((face, fid) => {
      const tris = face.length === 3
        ? [[face[0], face[1], face[2]]]
        : [[face[0], face[1], face[2]], [face[0], face[2], face[3]]];
      for (const [a, b, c] of tris) {
        for (const v of [a, b, c]) positions.push(...mesh.vertices[v]);
        this.triFace.push(fid);
      }
    });
    this.geometry = new THREE.BufferGeometry();
    this.geometry.setAttribute(
      "position", new THREE.Float32BufferAttribute(positions, 3));
    this.geometry.setAttribute(
      "color",
      new THREE.Float32BufferAttribute(new Float32Array(positions.length), 3));
    this.geometry.computeVertexNormals();
    const front = new THREE.Mesh(
      this.geometry,
      new THREE.MeshLambertMaterial({ vertexColors: true, side: THREE.FrontSide }),
    );
    const back = new THREE.Mesh(
      this.geometry,
      new THREE.MeshBasicMaterial({ color: BACKFACE_TINT, side: THREE.BackSide }),
    );
    const wire = new THREE.LineSegments(
      new THREE.WireframeGeometry(this.geometry),
      new THREE.LineBasicMaterial({ color: 0x303030, transparent: true, opacity: 0.35 }),
    );
    this.group.add(back, front, wire);
    this.setFaceStates(new Map());
  }

  /** Recolor all faces; unlisted faces fall back to the base color. */
  setFaceStates(states: Map<number, FaceState>): void {
    const colors = this.geometry.getAttribute("color") as THREE.BufferAttribute;
    for (let t = 0; t < this.triFace.length; t++) {
      const c = COLORS[states.get(this.triFace[t]) ?? "base"];
      for (let k = 0; k < 3; k++) {
        colors.setXYZ(3 * t + k, c.r, c.g, c.b);
      }
    }
    colors.needsUpdate = true;
  }

  boundingRadius(): number {
    let r = 0;
    for (let fid = 0; fid < this.mesh.faces.length; fid++) {
      const c = faceCentroid(this.mesh, fid);
      r = Math.max(r, Math.hypot(c[0], c[1], c[2]));
    }
    return r || 1;
  }
}
