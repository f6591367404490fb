/**
 * Dual-panel brush editor: the left panel paints the working low-poly
 * mesh, the right panel shows the reference geometry, and both render
 * through one shared camera so the views never drift apart. Strokes are
 * committed with the same connectivity rules the service enforces; the
 * context ring preview updates live; submission round-trips through the
 * repair service and swaps the returned patch into the left panel.
 */

import * as THREE from "three";
import { OrbitControls } from "three/addons/controls/OrbitControls.js";
import { RepairClient, RegionJson } from "../api/client.js";
import { BrushState, pickFaces } from "../core/brush.js";
import { Adjacency, Mesh as CoreMesh, faceAdjacency, parseObj } from "../core/mesh.js";
import { commitStroke, previewContext } from "../core/selection.js";
import { FaceState, MeshView } from "./meshview.js";

export class BrushApp {
  readonly brush: BrushState = {
    mode: "ring2d",
    rings: 1,
    radius: 0.15,
    backfaceTest: true,
    contextWidth: 3,
  };

  private renderer: THREE.WebGLRenderer;
  private camera: THREE.PerspectiveCamera;
  private controls: OrbitControls;
  private sceneLeft = new THREE.Scene();
  private sceneRight = new THREE.Scene();
  private viewLeft!: MeshView;
  private viewRight!: MeshView;
  private adjacency!: Adjacency;
  private selection = new Set<number>();
  private strokes: number[][] = [];
  private patchFaces = new Set<number>();
  private meshHash = "";
  private status: (msg: string) => void;

  constructor(
    private container: HTMLElement,
    private client: RepairClient,
    statusSink?: (msg: string) => void,
  ) {
    this.status = statusSink ?? ((msg) => console.log(msg));
    this.renderer = new THREE.WebGLRenderer({ antialias: true });
    this.renderer.setScissorTest(true);
    container.appendChild(this.renderer.domElement);
    this.camera = new THREE.PerspectiveCamera(40, 1, 0.01, 100);
    this.camera.position.set(2.2, 1.6, 2.2);
    this.controls = new OrbitControls(this.camera, this.renderer.domElement);
    for (const scene of [this.sceneLeft, this.sceneRight]) {
      scene.background = new THREE.Color(0x1c1f24);
      scene.add(new THREE.AmbientLight(0xffffff, 0.55));
      const key = new THREE.DirectionalLight(0xffffff, 1.1);
      key.position.set(3, 4, 2);
      scene.add(key);
    }
    this.renderer.domElement.addEventListener("pointerdown", (e) => this.onPaint(e));
    window.addEventListener("resize", () => this.layout());
    this.layout();
    this.renderer.setAnimationLoop(() => this.render());
  }

  /** Upload both meshes and populate the panels. */
  async load(lowPolyObj: string, referenceObj: string): Promise<void> {
    const lp = parseObj(lowPolyObj);
    this.meshHash = (await this.client.uploadMesh(lowPolyObj)).hash;
    this.adjacency = faceAdjacency(lp);
    this.viewLeft = new MeshView(lp);
    this.viewRight = new MeshView(parseObj(referenceObj));
    this.sceneLeft.add(this.viewLeft.group);
    this.sceneRight.add(this.viewRight.group);
    this.selection.clear();
    this.strokes = [];
    this.patchFaces.clear();
    const r = Math.max(this.viewLeft.boundingRadius(), this.viewRight.boundingRadius());
    this.camera.position.setLength(3 * r);
    this.refreshColors();
    this.status(`loaded mesh ${this.meshHash.slice(0, 12)} (${lp.faces.length} faces)`);
  }

  private panelWidth(): number {
    return Math.floor(this.container.clientWidth / 2);
  }

  private layout(): void {
    const w = this.container.clientWidth || 1280;
    const h = this.container.clientHeight || 640;
    this.renderer.setSize(w, h);
    this.camera.aspect = w / 2 / h;
    this.camera.updateProjectionMatrix();
  }

  private render(): void {
    const w = this.panelWidth();
    const h = this.container.clientHeight || this.renderer.domElement.height;
    this.controls.update();
    this.renderer.setViewport(0, 0, w, h);
    this.renderer.setScissor(0, 0, w, h);
    this.renderer.render(this.sceneLeft, this.camera);
    this.renderer.setViewport(w, 0, w, h);
    this.renderer.setScissor(w, 0, w, h);
    this.renderer.render(this.sceneRight, this.camera);
  }

  /** Pointer event -> world ray through the left panel. */
  private pointerRay(e: PointerEvent): { origin: [number, number, number]; dir: [number, number, number] } | null {
    const rect = this.renderer.domElement.getBoundingClientRect();
    const w = this.panelWidth();
    const x = e.clientX - rect.left;
    if (x >= w) return null; // right panel is view-only
    const ndc = new THREE.Vector2((x / w) * 2 - 1, -((e.clientY - rect.top) / rect.height) * 2 + 1);
    const ray = new THREE.Raycaster();
    ray.setFromCamera(ndc, this.camera);
    const o = ray.ray.origin;
    const d = ray.ray.direction;
    return { origin: [o.x, o.y, o.z], dir: [d.x, d.y, d.z] };
  }

  private onPaint(e: PointerEvent): void {
    if (!this.viewLeft || e.button !== 0 || e.shiftKey) return;
    const ray = this.pointerRay(e);
    if (!ray) return;
    const picked = pickFaces(this.viewLeft.coreMesh, this.adjacency, ray, this.brush);
    if (!picked.size) return;
    const res = commitStroke(this.adjacency, this.selection, picked);
    if (!res.accepted) {
      this.status("orphan stroke excluded (not adjacent to the selection)");
      return;
    }
    this.selection = res.selection;
    this.strokes.push([...picked].sort((a, b) => a - b));
    this.refreshColors();
  }

  clearSelection(): void {
    this.selection.clear();
    this.strokes = [];
    this.patchFaces.clear();
    this.refreshColors();
  }

  private refreshColors(): void {
    const states = new Map<number, FaceState>();
    for (const f of previewContext(this.adjacency, this.selection, this.brush.contextWidth)) {
      states.set(f, "context");
    }
    for (const f of this.selection) states.set(f, "selected");
    for (const f of this.patchFaces) states.set(f, "patch");
    this.viewLeft.setFaceStates(states);
  }

  /** Paint -> canonical region -> repair job -> swap the patch in. */
  async submitRepair(generator = "oracle", seed = 0): Promise<void> {
    if (!this.strokes.length) {
      this.status("nothing selected");
      return;
    }
    this.status("validating region...");
    const region = await this.client.postRegionStrokes(
      this.meshHash, this.strokes, this.brush.contextWidth);
    for (const w of region.warnings) this.status(w);
    this.status("repair queued...");
    const { job } = await this.client.postRepair(
      this.meshHash, region.region as RegionJson, generator, seed);
    const record = await this.client.pollJob(job);
    if (record.status !== "done" || !record.result_obj) {
      this.status(`job ${record.status}: ${record.verdict?.reason ?? record.error ?? ""}`);
      return;
    }
    const merged = parseObj(record.result_obj);
    const nPatch = parseObj(record.patch_obj ?? "").faces.length;
    this.adjacency = faceAdjacency(merged);
    this.viewLeft.rebuild(merged);
    this.selection.clear();
    this.strokes = [];
    this.patchFaces = new Set(
      Array.from({ length: nPatch }, (_, i) => merged.faces.length - nPatch + i));
    this.meshHash = (await this.client.uploadMesh(record.result_obj)).hash;
    this.refreshColors();
    const vmr = (record.metrics as { "A-VMR"?: number } | undefined)?.["A-VMR"];
    this.status(`patch swapped in (${nPatch} faces, A-VMR ${vmr ?? "n/a"})`);
  }
}
