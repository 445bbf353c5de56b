import { createApp, type AppState } from "./app.js";
import { configFromEnv, createEncoder } from "./encoder.js";

const port = process.env.PORT ? Number(process.env.PORT) : 8321;

const state: AppState = { encoder: null };
const app = createApp(state);

const server = app.listen(port, () => {
  // the app serves 503 until the encoder is in place, so even an expensive
  // model load keeps /v1/health responsive
  const config = configFromEnv();
  state.encoder = createEncoder(config);
  console.log(
    `embedding-service listening on :${port} ` +
      `(model_id=${state.encoder.modelId}, dim=${state.encoder.dim})`,
  );
});

for (const signal of ["SIGINT", "SIGTERM"] as const) {
  process.on(signal, () => {
    server.close(() => process.exit(0));
  });
}
