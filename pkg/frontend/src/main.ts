import { ApiClient, EditQueue } from "./api.js";
import {
  applyEditDelta,
  buildScene,
  switchView,
  VIEW_TRANSITION_MS,
  type Scene,
  type ViewState,
} from "./scene.js";
import { renderScene } from "./render.js";

/**
 * Browser entry point: minimal wiring, all logic lives in the tested modules.
 * Exercised manually against a running service; not covered by unit tests.
 */
export async function boot(root: HTMLElement, baseUrl = "/"): Promise<void> {
  const api = new ApiClient(baseUrl);
  const queue = new EditQueue(api);
  let view: ViewState = { kind: "hashtag", level: 3 };
  let scene: Scene | undefined;

  async function refresh(): Promise<void> {
    const [layout, rankings, clusters] = await Promise.all([
      api.layout(view.kind, view.level),
      api.rankings(view.kind, 200),
      api.clusters(view.kind, view.level),
    ]);
    scene = buildScene(layout, rankings.items, clusters);
    root.innerHTML = renderScene(scene);
  }

  root.addEventListener("dblclick", () => {
    view = switchView(view);
    root.style.transition = `opacity ${VIEW_TRANSITION_MS}ms`;
    void refresh();
  });

  root.addEventListener("mrgrank:score", (ev) => {
    const { itemId, uiScore } = (ev as CustomEvent).detail;
    void queue.submit(itemId, uiScore).then((delta) => {
      if (scene) {
        scene = applyEditDelta(scene, delta);
        root.innerHTML = renderScene(scene);
      }
    });
  });

  await refresh();
}
